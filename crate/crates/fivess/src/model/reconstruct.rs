//! Rebuilding the continuous trajectory from the sampled cycle sequence.
//!
//! The lambda-offset sample inside the fixed interval is an affine function
//! of the cycle-boundary state, so inverting that map recovers the boundary
//! state from each (sample, extreme) pair; the controlled interval follows
//! from the current-ramp identity. Quadratic transition matrices then fill
//! in the waveform between boundaries.

use crate::converter::{
    phase_model, quadratic_transition, CircuitParams, ContinuousState, CycleRecord, SwitchPhase,
    Topology, TracePoint,
};
use crate::error::{Error, Result};
use crate::mat2::{Mat2, Vec2};

/// Sampled cycle sequence: entry m pairs the voltage sampled in cycle m+1
/// with the current extreme that ended cycle m.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStateSeq {
    pub entries: Vec<DiscreteSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteSample {
    /// v[m+1]: voltage sampled inside the following cycle, volts.
    pub v: f64,
    /// i[m]: current extreme closing cycle m, amperes.
    pub i_extreme: f64,
}

impl DiscreteStateSeq {
    pub fn from_records(records: &[CycleRecord]) -> Self {
        let entries = records
            .windows(2)
            .map(|w| DiscreteSample {
                v: w[1].v_sample,
                i_extreme: w[0].i_extreme,
            })
            .collect();
        DiscreteStateSeq { entries }
    }
}

/// Continuous trajectory implied by a sampled sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedTrajectory {
    /// Dense waveform, starting at the first cycle boundary (t = 0).
    pub points: Vec<TracePoint>,
    /// Reconstructed states at the cycle boundaries.
    pub boundary_states: Vec<ContinuousState>,
    /// Reconstructed controlled intervals between consecutive boundaries.
    pub controlled_durations: Vec<f64>,
}

/// Quadratic affine map of the fixed phase over `dt`: the pair (Phi, Gamma)
/// with `x(dt) = Phi x0 + Gamma`. The buck uses the frozen-ramp quadratic
/// charging form, the boost the second-order transition matrices.
fn fixed_phase_affine(params: &CircuitParams, dt: f64) -> (Mat2, Vec2) {
    match params.topology {
        Topology::BoostConstantOffTime => {
            quadratic_transition(&phase_model(params, SwitchPhase::Off), dt)
        }
        Topology::BuckConstantOnTime => {
            let rc = params.rc();
            let l = params.inductance;
            let c = params.capacitance;
            let phi = Mat2::new(
                1.0 - dt / rc - dt * dt / (2.0 * l * c),
                dt / c,
                -dt / l,
                1.0,
            );
            let gamma = Vec2::new(
                params.v_in * dt * dt / (2.0 * l * c),
                params.v_in * dt / l,
            );
            (phi, gamma)
        }
    }
}

fn controlled_phase_affine(params: &CircuitParams, v_ref: f64, dt: f64) -> (Mat2, Vec2) {
    match params.topology {
        Topology::BoostConstantOffTime => {
            quadratic_transition(&phase_model(params, SwitchPhase::On), dt)
        }
        Topology::BuckConstantOnTime => {
            // Off phase with the ramp slope frozen at the sampled voltage.
            let rc = params.rc();
            let l = params.inductance;
            let c = params.capacitance;
            let slope = -v_ref / l;
            let phi = Mat2::new(1.0 - dt / rc, dt / c, 0.0, 1.0);
            let gamma = Vec2::new(slope * dt * dt / (2.0 * c), slope * dt);
            (phi, gamma)
        }
    }
}

/// Inversion of the lambda-offset sampling map: recover the boundary state
/// from one (sample, extreme) pair.
fn boundary_from_sample(
    params: &CircuitParams,
    sample: &DiscreteSample,
) -> Result<Vec2> {
    let (phi, gamma) = fixed_phase_affine(params, params.lambda * params.fixed_time);
    if phi.a.abs() < 1e-12 {
        return Err(Error::DegenerateParameters(
            "sampling map has a vanishing voltage coefficient".into(),
        ));
    }
    // v_sample = phi_vv v_b + phi_vi i_b + gamma_v, with i_b known exactly.
    let v_b = (sample.v - phi.b * sample.i_extreme - gamma.x) / phi.a;
    Ok(Vec2::new(v_b, sample.i_extreme))
}

/// Controlled interval between boundary m and boundary m+1 from the
/// current-ramp identity.
fn controlled_duration(
    params: &CircuitParams,
    entry: &DiscreteSample,
    next_extreme: f64,
) -> Result<f64> {
    let l = params.inductance;
    let t_fixed = params.fixed_time;
    let d = match params.topology {
        Topology::BoostConstantOffTime => {
            // t_on[m+1] = (i_p[m+1] - i_p[m] + m2 T_off)/m1,
            // m1 = V_in/L, m2 = (v[m+1] - V_in)/L.
            let m1 = params.v_in / l;
            let m2 = (entry.v - params.v_in) / l;
            (next_extreme - entry.i_extreme + m2 * t_fixed) / m1
        }
        Topology::BuckConstantOnTime => {
            // t_off[m+1] = (i_v[m] - i_v[m+1] + m1 T_on)/m2,
            // m1 = (V_in - v[m+1])/L, m2 = v[m+1]/L.
            let m1 = (params.v_in - entry.v) / l;
            let m2 = entry.v / l;
            (entry.i_extreme - next_extreme + m1 * t_fixed) / m2
        }
    };
    if d <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "sequence is inconsistent: reconstructed controlled interval {d:.3e} s"
        )));
    }
    Ok(d)
}

/// Reconstruct the continuous trajectory implied by a sampled sequence.
///
/// Time starts at the first reconstructed cycle boundary. The dense output
/// carries `points_per_interval` points per fixed interval, with phase
/// boundaries always emitted exactly.
pub fn reconstruct_continuous(
    seq: &DiscreteStateSeq,
    params: &CircuitParams,
    points_per_interval: u32,
) -> Result<ReconstructedTrajectory> {
    if seq.entries.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two sampled cycles to reconstruct".into(),
        ));
    }
    let (first_state, second_state) = match params.topology {
        Topology::BoostConstantOffTime => (SwitchPhase::Off.as_u8(), SwitchPhase::On.as_u8()),
        Topology::BuckConstantOnTime => (SwitchPhase::On.as_u8(), SwitchPhase::Off.as_u8()),
    };

    let mut points = Vec::new();
    let mut boundary_states = Vec::new();
    let mut controlled_durations = Vec::new();
    let mut t0 = 0.0;

    for (m, entry) in seq.entries.iter().enumerate() {
        let b = boundary_from_sample(params, entry)?;
        boundary_states.push(ContinuousState::new(b.x, b.y, t0));
        let Some(next) = seq.entries.get(m + 1) else {
            break;
        };
        let t_ctrl = controlled_duration(params, entry, next.i_extreme)?;
        controlled_durations.push(t_ctrl);

        // Fixed interval.
        let n_fixed = points_per_interval.max(1) as usize;
        for k in 0..n_fixed {
            let tau = params.fixed_time * k as f64 / n_fixed as f64;
            let (phi, gamma) = fixed_phase_affine(params, tau);
            let s = phi.mul_vec(b).add(gamma);
            points.push(TracePoint {
                t: t0 + tau,
                v: s.x,
                i_l: s.y,
                switch_state: first_state,
                cycle: m,
            });
        }
        // Controlled interval.
        let (phi_f, gamma_f) = fixed_phase_affine(params, params.fixed_time);
        let fixed_end = phi_f.mul_vec(b).add(gamma_f);
        let n_ctrl = ((points_per_interval as f64 * t_ctrl / params.fixed_time).round() as usize)
            .max(1);
        for k in 0..n_ctrl {
            let tau = t_ctrl * k as f64 / n_ctrl as f64;
            let (phi, gamma) = controlled_phase_affine(params, entry.v, tau);
            let s = phi.mul_vec(fixed_end).add(gamma);
            points.push(TracePoint {
                t: t0 + params.fixed_time + tau,
                v: s.x,
                i_l: s.y,
                switch_state: second_state,
                cycle: m,
            });
        }
        t0 += params.fixed_time + t_ctrl;
    }

    let last = *boundary_states.last().unwrap();
    points.push(TracePoint {
        t: last.t,
        v: last.v,
        i_l: last.i_l,
        switch_state: first_state,
        cycle: seq.entries.len() - 1,
    });

    Ok(ReconstructedTrajectory {
        points,
        boundary_states,
        controlled_durations,
    })
}

impl ReconstructedTrajectory {
    /// Re-apply the lambda-offset sampling map to the reconstructed
    /// boundaries. Inverse of the reconstruction by construction.
    pub fn resample(&self, params: &CircuitParams) -> DiscreteStateSeq {
        let (phi, gamma) = fixed_phase_affine(params, params.lambda * params.fixed_time);
        let entries = self
            .boundary_states
            .iter()
            .map(|b| {
                let s = phi.mul_vec(Vec2::new(b.v, b.i_l)).add(gamma);
                DiscreteSample {
                    v: s.x,
                    i_extreme: b.i_l,
                }
            })
            .collect();
        DiscreteStateSeq { entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::converter::{command_for_voltage, find_equilibrium, simulate, ConstantCommand, SimOptions};
    use crate::presets;
    use approx::assert_relative_eq;

    fn equilibrium_records(n: usize) -> (crate::converter::CircuitParams, Vec<CycleRecord>) {
        let p = presets::table2_boost();
        let cmd = command_for_voltage(&p, 40.0).unwrap();
        let eq = find_equilibrium(&p, cmd, 20_000, 1e-13).unwrap();
        let mut src = ConstantCommand(cmd);
        let trace = simulate(
            &p,
            eq.boundary_state,
            &mut src,
            &SimOptions {
                max_cycles: n,
                dense: false,
                ..SimOptions::default()
            },
        );
        (p, trace.cycles)
    }

    #[test]
    fn equilibrium_sequence_reconstructs_periodically() {
        let (p, records) = equilibrium_records(12);
        let seq = DiscreteStateSeq::from_records(&records);
        let rec = reconstruct_continuous(&seq, &p, 8).unwrap();
        // One current peak per period: every boundary state matches.
        let first = rec.boundary_states[0];
        for b in &rec.boundary_states[1..] {
            assert_relative_eq!(b.v, first.v, max_relative = 1e-9);
            assert_relative_eq!(b.i_l, first.i_l, max_relative = 1e-9);
        }
        // Period equals fixed plus controlled interval, uniformly.
        let d0 = rec.controlled_durations[0];
        for d in &rec.controlled_durations {
            assert_relative_eq!(*d, d0, max_relative = 1e-9);
        }
    }

    #[test]
    fn boundary_states_match_simulator_peaks() {
        // Transient run: step the command and compare reconstructed peak
        // states against the simulator within the quadratic-model tolerance.
        let p = presets::table2_boost();
        let c1 = command_for_voltage(&p, 40.0).unwrap();
        let c2 = command_for_voltage(&p, 41.0).unwrap();
        let eq = find_equilibrium(&p, c1, 20_000, 1e-13).unwrap();

        let mut records = Vec::new();
        let mut boundaries = Vec::new();
        let mut x = eq.boundary_state;
        for _ in 0..40 {
            let (next, rec) = crate::converter::run_cycle(&x, c2, &p).unwrap();
            records.push(rec);
            boundaries.push(next);
            x = next;
        }

        let seq = DiscreteStateSeq::from_records(&records);
        let rec = reconstruct_continuous(&seq, &p, 4).unwrap();
        // boundary_states[m] reconstructs the state at the event closing
        // cycle m, which the simulator reaches as boundaries[m].
        for (b, sim) in rec.boundary_states.iter().zip(&boundaries) {
            assert_relative_eq!(b.i_l, sim.i_l, max_relative = 1e-12);
            assert_relative_eq!(b.v, sim.v, max_relative = 1e-4);
        }
    }

    #[test]
    fn reconstructed_on_time_follows_ramp_identity() {
        let (p, records) = equilibrium_records(8);
        let seq = DiscreteStateSeq::from_records(&records);
        let rec = reconstruct_continuous(&seq, &p, 4).unwrap();
        for (m, d) in rec.controlled_durations.iter().enumerate() {
            let e = &seq.entries[m];
            let next = &seq.entries[m + 1];
            let m1 = p.v_in / p.inductance;
            let m2 = (e.v - p.v_in) / p.inductance;
            let expected = (next.i_extreme - e.i_extreme + m2 * p.fixed_time) / m1;
            assert_relative_eq!(*d, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn resample_is_exact_inverse() {
        let (p, records) = equilibrium_records(10);
        let seq = DiscreteStateSeq::from_records(&records);
        let rec = reconstruct_continuous(&seq, &p, 4).unwrap();
        let back = rec.resample(&p);
        for (a, b) in seq.entries.iter().zip(&back.entries) {
            assert_relative_eq!(a.v, b.v, max_relative = 1e-13);
            assert_relative_eq!(a.i_extreme, b.i_extreme, max_relative = 1e-13);
        }
    }
}
