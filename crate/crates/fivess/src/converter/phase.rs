//! Per-phase affine dynamics and their exact and quadratic flows.
//!
//! Within one switch phase every supported converter is affine,
//! `x' = A x + b` with `x = [v, i_L]`. The exact flow is evaluated through
//! the closed-form 2x2 matrix exponential; the quadratic flow is the
//! second-order truncation used by the cycle model and the trajectory
//! reconstruction.

use crate::converter::params::{CircuitParams, ContinuousState, SwitchPhase, Topology};
use crate::mat2::{Mat2, Vec2};

/// Affine generator of one switch phase: `d/dt [v, i_L] = a [v, i_L] + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseModel {
    pub a: Mat2,
    pub b: Vec2,
    pub phase: SwitchPhase,
    /// Set for the boost on-phase, whose voltage and current decouple.
    decoupled: bool,
    /// RC product kept for the decoupled closed form.
    rc: f64,
}

/// Build the affine generator for one topology and switch phase.
///
/// Boost, S1 off: the inductor feeds the output through the diode.
/// Boost, S1 on: the inductor ramps from the source while the output
/// capacitor discharges into the load alone.
/// Buck: the inductor feeds the output in both phases; only the voltage
/// across the inductor changes with the switch.
pub fn phase_model(params: &CircuitParams, phase: SwitchPhase) -> PhaseModel {
    let rc = params.rc();
    let c = params.capacitance;
    let l = params.inductance;
    let rs = params.series_resistance;
    let (a, b, decoupled) = match (params.topology, phase) {
        (Topology::BoostConstantOffTime, SwitchPhase::Off) => (
            Mat2::new(-1.0 / rc, 1.0 / c, -1.0 / l, -rs / l),
            Vec2::new(0.0, params.v_in / l),
            false,
        ),
        (Topology::BoostConstantOffTime, SwitchPhase::On) => (
            Mat2::new(-1.0 / rc, 0.0, 0.0, -rs / l),
            Vec2::new(0.0, params.v_in / l),
            rs == 0.0,
        ),
        (Topology::BuckConstantOnTime, SwitchPhase::On) => (
            Mat2::new(-1.0 / rc, 1.0 / c, -1.0 / l, -rs / l),
            Vec2::new(0.0, params.v_in / l),
            false,
        ),
        (Topology::BuckConstantOnTime, SwitchPhase::Off) => (
            Mat2::new(-1.0 / rc, 1.0 / c, -1.0 / l, -rs / l),
            Vec2::ZERO,
            false,
        ),
    };
    PhaseModel {
        a,
        b,
        phase,
        decoupled,
        rc,
    }
}

/// Exact flow of the affine phase over `dt >= 0`, to machine precision.
///
/// Coupled phases use the affine fixed point `p = -A^{-1} b` and the closed
/// form `x(dt) = p + exp(A dt) (x0 - p)`; `A` is always invertible there
/// (`det A = 1/(LC)`). The decoupled boost on-phase has a scalar solution.
pub fn propagate_exact(x: &ContinuousState, pm: &PhaseModel, dt: f64) -> ContinuousState {
    debug_assert!(dt >= 0.0, "negative phase duration {dt}");
    if dt == 0.0 {
        return *x;
    }
    if pm.decoupled {
        return ContinuousState::new(
            x.v * (-dt / pm.rc).exp(),
            x.i_l + pm.b.y * dt,
            x.t + dt,
        );
    }
    let state = Vec2::new(x.v, x.i_l);
    let next = if pm.b == Vec2::ZERO {
        pm.a.exp_scaled(dt).mul_vec(state)
    } else {
        // p = -A^{-1} b; every driven phase has an invertible generator
        // (det = 1/(LC) lossless, plus series-resistance terms otherwise).
        let p = pm
            .a
            .inverse()
            .expect("driven phase generator is invertible")
            .mul_vec(pm.b)
            .scale(-1.0);
        pm.a.exp_scaled(dt).mul_vec(state.sub(p)).add(p)
    };
    ContinuousState::new(next.x, next.y, x.t + dt)
}

/// Quadratic transition matrices `(Phi, Gamma)` of one phase:
/// `x(dt) = Phi x0 + Gamma` with `Phi = I + A dt + A^2 dt^2/2` and
/// `Gamma = (I dt + A dt^2/2) b`.
///
/// This is the second-order truncation of the exact flow; its error over one
/// interval is O(dt^3), which is the accuracy class the discrete cycle model
/// is built on.
pub fn quadratic_transition(pm: &PhaseModel, dt: f64) -> (Mat2, Vec2) {
    let a = pm.a;
    let a2 = a.mul_mat(&a);
    let phi = Mat2::IDENTITY
        .add(&a.scale(dt))
        .add(&a2.scale(0.5 * dt * dt));
    let gamma = pm.b.scale(dt).add(a.mul_vec(pm.b).scale(0.5 * dt * dt));
    (phi, gamma)
}

/// Quadratic flow over `dt`.
///
/// The boost phases apply the second-order transition matrices above. The
/// buck phases use the quadratic charging rule for a frozen linear current
/// ramp: `v(dt) = v0 + dt (i0/C - v0/RC) + dt^2 m/(2C)` and `i(dt) = i0 +
/// m dt`, with the ramp slope `m` evaluated at the interval-start voltage.
pub fn propagate_quadratic(
    x: &ContinuousState,
    params: &CircuitParams,
    phase: SwitchPhase,
    dt: f64,
) -> ContinuousState {
    debug_assert!(dt >= 0.0, "negative phase duration {dt}");
    match params.topology {
        Topology::BoostConstantOffTime => {
            let pm = phase_model(params, phase);
            let (phi, gamma) = quadratic_transition(&pm, dt);
            let next = phi.mul_vec(Vec2::new(x.v, x.i_l)).add(gamma);
            ContinuousState::new(next.x, next.y, x.t + dt)
        }
        Topology::BuckConstantOnTime => {
            let drive = match phase {
                SwitchPhase::On => params.v_in,
                SwitchPhase::Off => 0.0,
            };
            let slope = (drive - x.v - params.series_resistance * x.i_l) / params.inductance;
            let c = params.capacitance;
            let v = x.v + dt * (x.i_l / c - x.v / params.rc()) + dt * dt * slope / (2.0 * c);
            ContinuousState::new(v, x.i_l + slope * dt, x.t + dt)
        }
    }
}
