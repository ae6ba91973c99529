//! High-level scenario runners shared by the command line, the examples
//! and the verification suites.

use serde::{Deserialize, Serialize};

use crate::certify::{measure_step_metrics, StepMetrics, DEFAULT_SETTLE_BAND};
use crate::controller::{design_s2pi, ClosedLoop, DesignSpec, S2PiController};
use crate::converter::{
    command_for_voltage, find_equilibrium, simulate, CircuitParams, ConstantCommand, SimOptions,
    Termination, Trace,
};
use crate::error::{Error, Result};
use crate::model::{boost_plant, buck_plant, model_error, OperatingPoint};
use crate::scheduler::{
    build_controller_table, plan_steps, LoadModel, OperatingPointGrid, Supervisor, SwitchEvent,
    DEFAULT_SUPERVISOR_BAND, DEFAULT_SUPERVISOR_COUNT,
};

/// Default current-command clamp for closed-loop scenarios, amperes.
///
/// Roughly 2.9x the nominal peak current of the reference boost design, the
/// kind of headroom a command DAC full scale would give; it is what bounds
/// the inductor slew during large reference steps.
pub const DEFAULT_COMMAND_LIMITS: (f64, f64) = (0.0, 5.0);

/// Gain ceiling used for multi-volt reference work on the reference-class
/// boost, amperes per volt.
///
/// The settle-optimal designs kick the current command several amperes per
/// volt of error; across a 5 V sub-step that slams the actuator between its
/// limits and the recovery creeps at the integrator rate. Capping the gain
/// so a full sub-step's proportional kick stays inside the command range
/// gives the smooth few-microsecond staircase behavior the scheduler is
/// built for.
pub const LARGE_STEP_GAIN_CAP: f64 = 0.5;

/// Design constraints for multi-volt reference steps: the default
/// constraints plus the large-step gain cap.
pub fn large_step_spec() -> DesignSpec {
    DesignSpec {
        max_gain: Some(LARGE_STEP_GAIN_CAP),
        ..DesignSpec::default()
    }
}

/// Design the local compensator for one operating voltage.
pub fn design_at(
    params: &CircuitParams,
    v_out: f64,
    spec: &DesignSpec,
    limits: (f64, f64),
) -> Result<S2PiController> {
    let op = OperatingPoint::ideal(params, v_out)?;
    let plant = if params.topology.is_boost() {
        boost_plant(params, &op)?
    } else {
        buck_plant(params, &op)?
    };
    Ok(design_s2pi(&plant, spec)?.with_limits(limits.0, limits.1))
}

/// Open-loop run under a constant command, started from the commanded
/// fixed point.
pub fn run_open_loop(
    params: &CircuitParams,
    command: f64,
    cycles: usize,
    points_per_interval: u32,
) -> Result<Trace> {
    let eq = find_equilibrium(params, command, 40_000, 1e-13)?;
    let mut src = ConstantCommand(command);
    Ok(simulate(
        params,
        eq.boundary_state,
        &mut src,
        &SimOptions {
            max_cycles: cycles,
            points_per_interval,
            dense: true,
            ..SimOptions::default()
        },
    ))
}

/// One measured sub-step of a staircase run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepOutcome {
    pub v_from: f64,
    pub v_to: f64,
    pub start_cycle: usize,
    /// True when the supervisor's settled-down detector fired and the plan
    /// moved past this sub-step. The trace-sliced [`StepMetrics::settled`]
    /// is stricter because a segment ends a few cycles after the detector
    /// fires.
    pub advanced: bool,
    pub metrics: StepMetrics,
}

/// Gain-scheduled staircase outcome.
#[derive(Debug, Clone)]
pub struct StaircaseOutcome {
    pub trace: Trace,
    pub switch_events: Vec<SwitchEvent>,
    pub steps: Vec<StepOutcome>,
}

/// Run a gain-scheduled staircase from `v_start` through `targets`,
/// designing one local controller per grid point, and measure every
/// sub-step.
pub fn run_staircase(
    params: &CircuitParams,
    grid: &OperatingPointGrid,
    v_start: f64,
    v_final: f64,
    spec: &DesignSpec,
    limits: (f64, f64),
    max_cycles: usize,
) -> Result<StaircaseOutcome> {
    let load = LoadModel::Resistance(params.load_resistance);
    let table = build_controller_table(params, grid, spec, &load, limits)?;
    let plan = plan_steps(v_start, v_final, grid)?;
    if plan.is_empty() {
        return Err(Error::Planning("staircase plan is empty".into()));
    }

    let cmd0 = command_for_voltage(params, v_start)?;
    let eq0 = find_equilibrium(params, cmd0, 40_000, 1e-13)?;
    let mut supervisor = Supervisor::new(
        table,
        v_start,
        plan.clone(),
        eq0.i_extreme,
        DEFAULT_SUPERVISOR_BAND,
        DEFAULT_SUPERVISOR_COUNT,
    )?;
    let trace = simulate(
        params,
        eq0.boundary_state,
        &mut supervisor,
        &SimOptions {
            max_cycles,
            points_per_interval: 8,
            dense: true,
            ..SimOptions::default()
        },
    );

    // Sub-step boundaries: cycle 0 plus every recorded target switch.
    let mut boundaries: Vec<(usize, f64, f64)> = Vec::new();
    let mut prev_v = v_start;
    let mut prev_cycle = 0usize;
    let mut plan_iter = plan.iter();
    let first_target = *plan_iter.next().unwrap();
    let mut current = (prev_cycle, prev_v, first_target);
    for ev in &supervisor.switch_events {
        // The initial activation switch carries the unchanged first target
        // and does not open a new sub-step.
        if ev.new_target == current.2 {
            continue;
        }
        boundaries.push((current.0, current.1, current.2));
        prev_v = current.2;
        prev_cycle = ev.cycle;
        current = (prev_cycle, prev_v, ev.new_target);
    }
    boundaries.push((current.0, current.1, current.2));

    let finished = trace.termination == Termination::Completed;
    let mut steps = Vec::new();
    for (k, &(start_cycle, v_from, v_to)) in boundaries.iter().enumerate() {
        let end_cycle = boundaries
            .get(k + 1)
            .map(|b| b.0)
            .unwrap_or(trace.cycles.len());
        let advanced = k + 1 < boundaries.len() || finished;
        let sub = slice_trace(&trace, start_cycle, end_cycle);
        if sub.cycles.is_empty() {
            continue;
        }
        let eq_from = find_equilibrium(params, command_for_voltage(params, v_from)?, 40_000, 1e-13)?;
        let eq_to = find_equilibrium(params, command_for_voltage(params, v_to)?, 40_000, 1e-13)?;
        let metrics = measure_step_metrics(
            &sub,
            eq_from.v_sample,
            eq_to.v_sample,
            eq_from.i_extreme,
            eq_to.i_extreme,
            DEFAULT_SETTLE_BAND,
        )?;
        steps.push(StepOutcome {
            v_from,
            v_to,
            start_cycle,
            advanced,
            metrics,
        });
    }

    Ok(StaircaseOutcome {
        trace,
        switch_events: supervisor.switch_events,
        steps,
    })
}

/// View of a cycle range of a trace as its own trace.
pub fn slice_trace(trace: &Trace, start_cycle: usize, end_cycle: usize) -> Trace {
    let cycles: Vec<_> = trace
        .cycles
        .iter()
        .filter(|c| c.n >= start_cycle && c.n < end_cycle)
        .copied()
        .collect();
    let points: Vec<_> = trace
        .points
        .iter()
        .filter(|p| p.cycle >= start_cycle && p.cycle < end_cycle)
        .copied()
        .collect();
    Trace {
        points,
        cycles,
        termination: trace.termination,
        final_state: trace.final_state,
    }
}

/// Load-step outcome at a fixed reference.
#[derive(Debug, Clone)]
pub struct LoadStepOutcome {
    pub trace: Trace,
    /// Cycle index at which the load changed.
    pub step_cycle: usize,
    /// Largest deviation of the dense voltage from the reference after the
    /// load change, volts.
    pub max_deviation: f64,
    /// True when the voltage re-entered and held the band by trace end.
    pub recovered: bool,
}

/// Closed-loop load disturbance: regulate at `v_ref` with the local design,
/// then switch the load resistance and watch the recovery.
pub fn run_load_step(
    params: &CircuitParams,
    v_ref: f64,
    r_after: f64,
    spec: &DesignSpec,
    limits: (f64, f64),
    pre_cycles: usize,
    post_cycles: usize,
) -> Result<LoadStepOutcome> {
    if r_after <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "post-step load resistance must be > 0, got {r_after}"
        )));
    }
    let ctrl = design_at(params, v_ref, spec, limits)?;
    let cmd = command_for_voltage(params, v_ref)?;
    let eq = find_equilibrium(params, cmd, 40_000, 1e-13)?;

    let mut loop_ctrl = ctrl;
    loop_ctrl.reseed(eq.i_extreme, 0.0);
    let mut source = ClosedLoop::new(loop_ctrl, move |_| v_ref);

    let opts = SimOptions {
        max_cycles: pre_cycles,
        points_per_interval: 8,
        dense: true,
        ..SimOptions::default()
    };
    let pre = simulate(params, eq.boundary_state, &mut source, &opts);
    if pre.termination == Termination::CcmViolation {
        return Err(Error::InvalidParameter("pre-step run left CCM".into()));
    }

    let mut after_params = *params;
    after_params.load_resistance = r_after;
    let post = simulate(
        &after_params,
        pre.final_state,
        &mut source,
        &SimOptions {
            max_cycles: post_cycles,
            ..opts
        },
    );

    let max_deviation = post
        .points
        .iter()
        .map(|p| (p.v - v_ref).abs())
        .fold(0.0, f64::max);
    // Recovery: sampled voltage back inside 0.5 % of the reference for the
    // final tenth of the run.
    let tail = post.cycles.len().saturating_sub(post.cycles.len() / 10);
    let recovered = post.cycles[tail..]
        .iter()
        .all(|c| (c.v_sample - v_ref).abs() <= 5e-3 * v_ref);

    // Merge for output, renumbering the post-step cycles.
    let step_cycle = pre.cycles.len();
    let mut points = pre.points;
    points.pop(); // drop the duplicated boundary point
    let mut cycles = pre.cycles;
    for mut p in post.points {
        p.cycle += step_cycle;
        points.push(p);
    }
    for mut c in post.cycles {
        c.n += step_cycle;
        cycles.push(c);
    }
    let trace = Trace {
        points,
        cycles,
        termination: post.termination,
        final_state: post.final_state,
    };
    Ok(LoadStepOutcome {
        trace,
        step_cycle,
        max_deviation,
        recovered,
    })
}

/// One point of the model-fidelity study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub step_v: f64,
    pub e_w_percent: f64,
}

/// Deterministic setup for the model-fidelity study at one operating
/// point: the measured (numerically linearized) plant as the model under
/// test, and a survey compensator designed with the large-step gain cap so
/// multi-volt excitations stay representative of regulation rather than
/// actuator banging.
pub struct FidelityStudy {
    pub operating_point: OperatingPoint,
    pub model: crate::model::PlantCoefficients,
    pub controller: S2PiController,
}

pub fn fidelity_study(params: &CircuitParams, v_op: f64) -> Result<FidelityStudy> {
    let op = OperatingPoint::from_simulation(params, v_op)?;
    let closed_form = if params.topology.is_boost() {
        boost_plant(params, &op)?
    } else {
        buck_plant(params, &op)?
    };
    let model = crate::model::numerical_linearization_oracle(
        params,
        &op,
        crate::model::DEFAULT_ORACLE_DELTA_REL * op.i_extreme,
    )?;
    // Wide command range: the study isolates the converter's own
    // large-signal behavior (current slew, minimum on-time), not a command
    // clamp, so the compensator must not be the first thing to saturate.
    let controller = design_s2pi(&closed_form, &large_step_spec())?.with_limits(0.0, 50.0);
    Ok(FidelityStudy {
        operating_point: op,
        model,
        controller,
    })
}

/// Closed-loop model-versus-simulation worst-case error for one reference
/// step: both loops run the same compensator, one against the cycle-exact
/// simulator, one against the linearized plant recursion.
pub fn model_error_for_step(
    params: &CircuitParams,
    study: &FidelityStudy,
    step_v: f64,
    cycles: usize,
) -> Result<f64> {
    let plant = &study.model;
    let ctrl = study.controller;
    let cmd1 = command_for_voltage(params, study.operating_point.v_out)?;
    let eq1 = find_equilibrium(params, cmd1, 40_000, 1e-13)?;
    let v_ref = eq1.v_sample + step_v;

    // Cycle-exact closed loop.
    let mut sim_ctrl = ctrl;
    sim_ctrl.reseed(eq1.i_extreme, 0.0);
    let mut source = ClosedLoop::new(sim_ctrl, move |_| v_ref);
    let trace = simulate(
        params,
        eq1.boundary_state,
        &mut source,
        &SimOptions {
            max_cycles: cycles,
            dense: false,
            ..SimOptions::default()
        },
    );
    if trace.termination == Termination::CcmViolation {
        return Err(Error::InvalidParameter(format!(
            "closed loop left CCM during the {step_v} V step"
        )));
    }
    let v_sim = trace.sampled_voltages();

    // Same loop against the plant recursion, in absolute terms: the
    // command perturbation of cycle n drives the sample of cycle n+1.
    let mut v_model = Vec::with_capacity(cycles);
    {
        let mut mdl_ctrl = ctrl;
        mdl_ctrl.reseed(eq1.i_extreme, 0.0);
        let mut vt = vec![0.0f64; cycles + 1];
        let mut ut = vec![0.0f64; cycles + 1];
        for n in 0..cycles {
            if n >= 1 {
                vt[n] = plant.gamma_v * vt[n - 1]
                    + plant.gamma_i * ut[n - 1]
                    + plant.gamma_im1 * if n >= 2 { ut[n - 2] } else { 0.0 };
            }
            let u_abs = mdl_ctrl.step(v_ref - (eq1.v_sample + vt[n]));
            ut[n] = u_abs - eq1.i_extreme;
            v_model.push(eq1.v_sample + vt[n]);
        }
    }

    let report = model_error(&v_model, &v_sim, step_v)?;
    Ok(report.e_w)
}

/// Model-fidelity sweep over reference step sizes at one operating point.
pub fn model_error_sweep(
    params: &CircuitParams,
    v_op: f64,
    steps: &[f64],
    cycles: usize,
) -> Result<Vec<SweepPoint>> {
    let study = fidelity_study(params, v_op)?;
    steps
        .iter()
        .map(|&s| {
            Ok(SweepPoint {
                step_v: s,
                e_w_percent: model_error_for_step(params, &study, s, cycles)?,
            })
        })
        .collect()
}
