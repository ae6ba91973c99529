//! Randomized closed-loop scenario suites: the settling-time and overshoot
//! bound battery, and the stability/instability dichotomy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certify::metrics::{
    measure_step_metrics, overshoot_bound, settling_time_bound, BoundCheck, StepMetrics,
    DEFAULT_SETTLE_BAND,
};
use crate::controller::{closed_loop_poles, design_s2pi, ClosedLoop, DesignSpec, S2PiController};
use crate::converter::{
    command_for_voltage, find_equilibrium, simulate, CircuitParams, SimOptions, Trace,
};
use crate::error::Result;
use crate::model::{boost_plant, OperatingPoint};

/// One randomized reference step and its bound checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioCheck {
    pub v_from: f64,
    pub v_to: f64,
    pub metrics: StepMetrics,
    pub settling: BoundCheck,
    pub overshoot: BoundCheck,
}

/// Outcome of the randomized bound suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundSuiteReport {
    pub checks: Vec<ScenarioCheck>,
    pub settling_failures: usize,
    pub overshoot_failures: usize,
}

impl BoundSuiteReport {
    pub fn all_hold(&self) -> bool {
        self.settling_failures == 0 && self.overshoot_failures == 0
    }
}

/// Default voltage window for randomized boost steps at the reference
/// design: upward steps of 0.3..3 V starting within 34..41 V, the region
/// where the small-signal plant stays representative.
pub const STEP_RANGE: (f64, f64, f64, f64) = (34.0, 41.0, 0.3, 3.0);

/// Compensator the suites run with: designed at the given operating
/// voltage with the default constraints, command clamped to a generous
/// physical range.
pub fn suite_controller(params: &CircuitParams, v_design: f64) -> Result<S2PiController> {
    let op = OperatingPoint::ideal(params, v_design)?;
    let plant = boost_plant(params, &op)?;
    Ok(design_s2pi(&plant, &DesignSpec::default())?.with_limits(0.0, 50.0))
}

/// Run one closed-loop reference step from equilibrium and measure it.
pub fn run_reference_step(
    params: &CircuitParams,
    ctrl: &S2PiController,
    v_from: f64,
    v_to: f64,
    max_cycles: usize,
) -> Result<(Trace, StepMetrics, f64, f64)> {
    let cmd1 = command_for_voltage(params, v_from)?;
    let eq1 = find_equilibrium(params, cmd1, 40_000, 1e-13)?;
    let cmd2 = command_for_voltage(params, v_to)?;
    let eq2 = find_equilibrium(params, cmd2, 40_000, 1e-13)?;

    let mut loop_ctrl = *ctrl;
    loop_ctrl.reseed(eq1.i_extreme, 0.0);
    let mut source = ClosedLoop::new(loop_ctrl, move |_| v_to);
    let trace = simulate(
        params,
        eq1.boundary_state,
        &mut source,
        &SimOptions {
            max_cycles,
            points_per_interval: 8,
            dense: true,
            ..SimOptions::default()
        },
    );
    let metrics = measure_step_metrics(
        &trace,
        eq1.v_sample,
        eq2.v_sample,
        eq1.i_extreme,
        eq2.i_extreme,
        DEFAULT_SETTLE_BAND,
    )?;
    Ok((trace, metrics, eq1.i_extreme, eq2.i_extreme))
}

/// Randomized settling-time and overshoot bound battery for the boost.
pub fn boost_bound_suite(
    params: &CircuitParams,
    ctrl: &S2PiController,
    runs: usize,
    seed: u64,
) -> Result<BoundSuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (v_lo, v_hi, dv_lo, dv_hi) = STEP_RANGE;
    let mut checks = Vec::with_capacity(runs);
    let mut settling_failures = 0;
    let mut overshoot_failures = 0;

    for _ in 0..runs {
        let v_from = rng.gen_range(v_lo..v_hi);
        let v_to = v_from + rng.gen_range(dv_lo..dv_hi);
        let (_, metrics, i_e1, i_e2) = run_reference_step(params, ctrl, v_from, v_to, 4000)?;
        let settling = settling_time_bound(&metrics, params, v_from, v_to, i_e1, i_e2)?;
        let overshoot = overshoot_bound(&metrics, params)?;
        if !settling.holds {
            settling_failures += 1;
        }
        if !overshoot.holds {
            overshoot_failures += 1;
        }
        checks.push(ScenarioCheck {
            v_from,
            v_to,
            metrics,
            settling,
            overshoot,
        });
    }
    Ok(BoundSuiteReport {
        checks,
        settling_failures,
        overshoot_failures,
    })
}

/// One design run in the dichotomy battery.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyRun {
    pub gain: f64,
    pub zero: f64,
    pub dominant_radius: f64,
    pub settled: bool,
}

/// Stability dichotomy report: designs with dominant radius below the
/// stable threshold must settle, gain-scaled designs pushed past the unit
/// circle must not.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub stable_runs: Vec<DichotomyRun>,
    pub unstable_runs: Vec<DichotomyRun>,
}

impl DichotomyReport {
    pub fn pass(&self) -> bool {
        self.stable_runs.iter().all(|r| r.settled)
            && self.unstable_runs.iter().any(|_| true)
            && self.unstable_runs.iter().all(|r| !r.settled)
    }
}

/// Empirical stability transfer at the boost reference design: sample
/// `n_each` compensators with dominant radius < 0.98 (all must settle a
/// 38 -> 40 V step) and `n_each` gain-scaled ones with dominant radius
/// > 1.02 (none may settle within `max_cycles`).
pub fn stability_dichotomy(
    params: &CircuitParams,
    n_each: usize,
    seed: u64,
    max_cycles: usize,
) -> Result<DichotomyReport> {
    let op = OperatingPoint::ideal(params, 40.0)?;
    let plant = boost_plant(params, &op)?;
    let base = design_s2pi(&plant, &DesignSpec::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let radius_of = |gain: f64, zero: f64| {
        let c = S2PiController::new(gain, zero, 1.0);
        let poles = closed_loop_poles(&plant, &c);
        poles.iter().map(|z| z.norm()).fold(0.0f64, f64::max)
    };

    // Sample in the region below the plant pole, where the dominant radius
    // actually responds to the gain; designs that cancel the pole from
    // above keep a large-radius low-residue pole regardless of gain.
    let mut stable_designs = Vec::new();
    let mut guard = 0;
    while stable_designs.len() < n_each {
        guard += 1;
        if guard > 10_000 {
            return Err(crate::error::Error::InvalidParameter(
                "could not sample enough stable designs".into(),
            ));
        }
        let gain = base.gain * 10f64.powf(rng.gen_range(0.2..1.2));
        let zero = rng.gen_range(plant.a1 - 0.1..plant.a1 - 0.005);
        let r = radius_of(gain, zero);
        if r < 0.98 {
            stable_designs.push((gain, zero, r));
        }
    }

    let mut unstable_designs = Vec::new();
    for &(gain, zero, _) in &stable_designs {
        // Scale the gain until the dominant pole leaves the unit disk.
        let mut f = 1.5;
        let mut found = None;
        for _ in 0..60 {
            let r = radius_of(gain * f, zero);
            if r > 1.02 {
                found = Some((gain * f, zero, r));
                break;
            }
            f *= 1.3;
        }
        let d = found.ok_or_else(|| {
            crate::error::Error::InvalidParameter(
                "gain scaling never destabilized the loop".into(),
            )
        })?;
        unstable_designs.push(d);
    }

    let run = |gain: f64, zero: f64, radius: f64| -> Result<DichotomyRun> {
        let ctrl = S2PiController::new(gain, zero, 1.0).with_limits(0.0, 50.0);
        let (_, metrics, _, _) = run_reference_step(params, &ctrl, 38.0, 40.0, max_cycles)?;
        Ok(DichotomyRun {
            gain,
            zero,
            dominant_radius: radius,
            settled: metrics.settled,
        })
    };
    let stable_runs = stable_designs
        .iter()
        .map(|&(g, z, r)| run(g, z, r))
        .collect::<Result<Vec<_>>>()?;
    let unstable_runs = unstable_designs
        .iter()
        .map(|&(g, z, r)| run(g, z, r))
        .collect::<Result<Vec<_>>>()?;

    Ok(DichotomyReport {
        stable_runs,
        unstable_runs,
    })
}
