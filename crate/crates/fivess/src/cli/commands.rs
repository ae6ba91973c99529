//! Batch commands behind the `fivess` binary: simulate, design, certify,
//! sweep.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::certify::{
    boost_bound_suite, boost_gas_certificate, buck_gas_certificate, check_discrete_stability,
    measure_step_metrics, sector_bounds, GasCertificate, SectorBound, StabilityCheck, StepMetrics,
    DEFAULT_SETTLE_BAND,
};
use crate::cli::config::{
    emit_config, CertifyConfig, ControllerConfig, ScenarioConfig, ScenarioKind,
};
use crate::cli::csv::{
    round_trace, roundtrip_sig, write_cycles_csv, write_sweep_csv, write_trace_csv,
};
use crate::controller::{closed_loop_poles, design_s2pi, ClosedLoop, S2PiController};
use crate::converter::{
    command_for_voltage, find_equilibrium, simulate, CircuitParams, SimOptions, Termination,
    Topology, Trace,
};
use crate::error::{Error, Result};
use crate::model::{boost_plant, buck_plant, OperatingPoint, PlantCoefficients};
use crate::scenario::{
    fidelity_study, model_error_for_step, run_load_step, run_open_loop, run_staircase,
    slice_trace, SweepPoint,
};
use crate::scheduler::OperatingPointGrid;

/// Run provenance attached to every summary.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    /// SHA-256 of the normalized configuration.
    pub config_sha256: String,
    pub version: String,
}

fn provenance(cfg: &ScenarioConfig) -> Result<Provenance> {
    let normalized = emit_config(cfg)?;
    let mut hasher = Sha256::new();
    hasher.update(normalized.as_bytes());
    Ok(Provenance {
        config_sha256: format!("{:x}", hasher.finalize()),
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// One measured transition in a summary.
#[derive(Debug, Clone, Serialize)]
pub struct TransitionSummary {
    pub v_from: f64,
    pub v_to: f64,
    pub i_from: f64,
    pub i_to: f64,
    pub start_cycle: usize,
    pub advanced: Option<bool>,
    pub metrics: StepMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct LoadStepSummary {
    pub step_cycle: usize,
    pub max_deviation_v: f64,
    pub deviation_fraction: f64,
    pub recovered: bool,
}

/// Summary document written next to the CSV outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub provenance: Provenance,
    pub params: CircuitParams,
    pub termination: Termination,
    pub cycles: usize,
    pub transitions: Vec<TransitionSummary>,
    pub load_step: Option<LoadStepSummary>,
}

/// Resolve the compensator for a scenario: explicit gains or a fresh design
/// at the scenario's operating voltage.
pub fn resolve_controller(
    params: &CircuitParams,
    controller: &ControllerConfig,
    v_design: f64,
) -> Result<S2PiController> {
    if let Some(c) = controller.explicit_controller() {
        return Ok(c);
    }
    let op = OperatingPoint::ideal(params, v_design)?;
    let plant = plant_at(params, &op)?;
    let limits = controller.command_limits();
    Ok(design_s2pi(&plant, &controller.design_spec())?.with_limits(limits.0, limits.1))
}

fn plant_at(params: &CircuitParams, op: &OperatingPoint) -> Result<PlantCoefficients> {
    match params.topology {
        Topology::BoostConstantOffTime => boost_plant(params, op),
        Topology::BuckConstantOnTime => buck_plant(params, op),
    }
}

fn equilibrium_pair(params: &CircuitParams, v: f64) -> Result<(f64, f64)> {
    let eq = find_equilibrium(params, command_for_voltage(params, v)?, 40_000, 1e-13)?;
    Ok((eq.v_sample, eq.i_extreme))
}

/// Run the configured scenario and write `trace.csv`, `cycles.csv` and
/// `summary.json` under `out_dir`. All emitted floats carry 12 significant
/// digits; summary metrics are computed from the rounded values, so
/// recomputing them from the files reproduces the summary exactly.
pub fn cmd_simulate(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunSummary> {
    let params = cfg.params.resolve()?;
    let ppi = cfg.outputs.points_per_interval;

    let mut transitions: Vec<TransitionSummary> = Vec::new();
    let mut load_step = None;

    let trace: Trace = match &cfg.scenario {
        ScenarioKind::OpenLoop { command, cycles } => {
            run_open_loop(&params, *command, *cycles, ppi)?
        }
        ScenarioKind::ReferenceStep {
            v_from,
            v_to,
            max_cycles,
        } => {
            let ctrl = resolve_controller(&params, &cfg.controller, *v_to)?;
            let (v1, i1) = equilibrium_pair(&params, *v_from)?;
            let (v2, i2) = equilibrium_pair(&params, *v_to)?;
            let eq1 = find_equilibrium(&params, command_for_voltage(&params, *v_from)?, 40_000, 1e-13)?;
            let mut loop_ctrl = ctrl;
            loop_ctrl.reseed(i1, 0.0);
            let target = *v_to;
            let mut source = ClosedLoop::new(loop_ctrl, move |_| target);
            let trace = simulate(
                &params,
                eq1.boundary_state,
                &mut source,
                &SimOptions {
                    max_cycles: *max_cycles,
                    points_per_interval: ppi,
                    dense: true,
                    ..SimOptions::default()
                },
            );
            let rounded = round_trace(&trace);
            let args = [v1, v2, i1, i2].map(roundtrip_sig);
            let metrics = measure_step_metrics(
                &rounded,
                args[0],
                args[1],
                args[2],
                args[3],
                DEFAULT_SETTLE_BAND,
            )?;
            transitions.push(TransitionSummary {
                v_from: args[0],
                v_to: args[1],
                i_from: args[2],
                i_to: args[3],
                start_cycle: 0,
                advanced: None,
                metrics,
            });
            trace
        }
        ScenarioKind::Staircase {
            v_start,
            targets,
            region_radius,
            max_cycles,
        } => {
            let mut voltages = targets.clone();
            voltages.push(*v_start);
            voltages.sort_by(f64::total_cmp);
            voltages.dedup();
            let grid = OperatingPointGrid::new(voltages, *region_radius)?;
            let v_final = *targets.last().unwrap();
            let out = run_staircase(
                &params,
                &grid,
                *v_start,
                v_final,
                &cfg.controller.design_spec(),
                cfg.controller.command_limits(),
                *max_cycles,
            )?;
            let rounded = round_trace(&out.trace);
            for (k, step) in out.steps.iter().enumerate() {
                let end_cycle = out
                    .steps
                    .get(k + 1)
                    .map(|s| s.start_cycle)
                    .unwrap_or(rounded.cycles.len());
                let sub = slice_trace(&rounded, step.start_cycle, end_cycle);
                let (v1, i1) = equilibrium_pair(&params, step.v_from)?;
                let (v2, i2) = equilibrium_pair(&params, step.v_to)?;
                let args = [v1, v2, i1, i2].map(roundtrip_sig);
                let metrics = measure_step_metrics(
                    &sub,
                    args[0],
                    args[1],
                    args[2],
                    args[3],
                    DEFAULT_SETTLE_BAND,
                )?;
                transitions.push(TransitionSummary {
                    v_from: args[0],
                    v_to: args[1],
                    i_from: args[2],
                    i_to: args[3],
                    start_cycle: step.start_cycle,
                    advanced: Some(step.advanced),
                    metrics,
                });
            }
            out.trace
        }
        ScenarioKind::LoadStep {
            v_ref,
            r_to,
            pre_cycles,
            post_cycles,
        } => {
            let out = run_load_step(
                &params,
                *v_ref,
                *r_to,
                &cfg.controller.design_spec(),
                cfg.controller.command_limits(),
                *pre_cycles,
                *post_cycles,
            )?;
            let rounded = round_trace(&out.trace);
            let max_dev = rounded
                .points
                .iter()
                .filter(|p| p.cycle >= out.step_cycle)
                .map(|p| (p.v - roundtrip_sig(*v_ref)).abs())
                .fold(0.0, f64::max);
            load_step = Some(LoadStepSummary {
                step_cycle: out.step_cycle,
                max_deviation_v: max_dev,
                deviation_fraction: max_dev / v_ref,
                recovered: out.recovered,
            });
            out.trace
        }
    };

    let rounded = round_trace(&trace);
    write_trace_csv(&out_dir.join(&cfg.outputs.trace), &rounded)?;
    write_cycles_csv(&out_dir.join(&cfg.outputs.cycles), &rounded.cycles)?;

    let summary = RunSummary {
        provenance: provenance(cfg)?,
        params,
        termination: rounded.termination,
        cycles: rounded.cycles.len(),
        transitions,
        load_step,
    };
    let path = out_dir.join(&cfg.outputs.summary);
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Config(format!("summary serialization: {e}")))?;
    std::fs::write(&path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(summary)
}

/// Designed compensator with its pole map.
#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub v_design: f64,
    pub plant: PlantCoefficients,
    pub gain: f64,
    pub zero: f64,
    pub pole: f64,
    pub closed_loop_poles: Vec<(f64, f64)>,
    pub pole_radii: Vec<f64>,
}

/// Design (or echo) the compensator for the configured scenario and report
/// the closed-loop pole map.
pub fn cmd_design(cfg: &ScenarioConfig) -> Result<DesignReport> {
    let params = cfg.params.resolve()?;
    let v_design = cfg.scenario.design_voltage().ok_or_else(|| {
        Error::Config("design needs a scenario with a voltage target".into())
    })?;
    let op = OperatingPoint::ideal(&params, v_design)?;
    let plant = plant_at(&params, &op)?;
    let ctrl = resolve_controller(&params, &cfg.controller, v_design)?;
    let poles = closed_loop_poles(&plant, &ctrl);
    Ok(DesignReport {
        v_design,
        plant,
        gain: ctrl.gain,
        zero: ctrl.zero,
        pole: ctrl.pole,
        closed_loop_poles: poles.iter().map(|z| (z.re, z.im)).collect(),
        pole_radii: poles.iter().map(|z| z.norm()).collect(),
    })
}

/// Certificate battery outcome.
#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub v_design: f64,
    pub stability: StabilityCheck,
    pub gas: GasCertificate,
    pub sector: Option<SectorBound>,
    /// Boost only: randomized settling/overshoot bound counts
    /// (runs, settling failures, overshoot failures).
    pub bound_suite: Option<(usize, usize, usize)>,
    pub pass: bool,
}

/// Evaluate every certificate applicable to the configured converter.
pub fn cmd_certify(cfg: &ScenarioConfig) -> Result<CertifyReport> {
    let params = cfg.params.resolve()?;
    let v_design = cfg
        .scenario
        .design_voltage()
        .or(match params.topology {
            Topology::BoostConstantOffTime => Some(40.0),
            Topology::BuckConstantOnTime => Some(1.8),
        })
        .unwrap();
    let op = OperatingPoint::ideal(&params, v_design)?;
    let plant = plant_at(&params, &op)?;
    let ctrl = resolve_controller(&params, &cfg.controller, v_design)?;
    let stability = check_discrete_stability(&plant, &ctrl);

    let cc: &CertifyConfig = &cfg.certify;
    let gas = match params.topology {
        Topology::BoostConstantOffTime => boost_gas_certificate(
            &params,
            &op,
            cc.g_ab,
            params.lambda,
            cc.controlled_time_min,
            cc.controlled_time_max,
        )?,
        Topology::BuckConstantOnTime => buck_gas_certificate(
            &params,
            &op,
            cc.g_ab,
            cc.controlled_time_min,
            cc.controlled_time_max,
        )?,
    };

    let sector = match &cc.sector {
        Some(s) => Some(sector_bounds(s.f_ub, s.a_ub, s.g0)?),
        None => None,
    };

    let bound_suite = if params.topology.is_boost() {
        let suite_ctrl = crate::certify::suite_controller(&params, v_design)?;
        let report = boost_bound_suite(&params, &suite_ctrl, cc.runs, cfg.seed)?;
        Some((
            report.checks.len(),
            report.settling_failures,
            report.overshoot_failures,
        ))
    } else {
        None
    };

    let suite_ok = bound_suite.map_or(true, |(_, s, o)| s == 0 && o == 0);
    let pass = stability.stable && gas.stable && suite_ok;
    Ok(CertifyReport {
        v_design,
        stability,
        gas,
        sector,
        bound_suite,
        pass,
    })
}

/// Step sizes of the canonical model-fidelity sweep, volts.
pub const SWEEP_STEPS: [f64; 6] = [0.5, 1.0, 2.0, 4.0, 6.0, 8.0];

/// Run the model-fidelity sweep at the scenario's operating voltage and
/// write `sweep.csv`. Points run in parallel on up to `threads` workers;
/// the output order is fixed regardless of scheduling.
pub fn cmd_sweep(cfg: &ScenarioConfig, out_dir: &Path, threads: usize) -> Result<Vec<SweepPoint>> {
    let params = cfg.params.resolve()?;
    if !params.topology.is_boost() {
        return Err(Error::Config(
            "the fidelity sweep is defined for the boost converter".into(),
        ));
    }
    let v_op = cfg.scenario.design_voltage().unwrap_or(40.0);
    let study = fidelity_study(&params, v_op)?;

    let results: Mutex<Vec<Option<Result<f64>>>> =
        Mutex::new((0..SWEEP_STEPS.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, SWEEP_STEPS.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= SWEEP_STEPS.len() {
                    break;
                }
                let r = model_error_for_step(&params, &study, SWEEP_STEPS[i], 3000);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });

    let mut points = Vec::with_capacity(SWEEP_STEPS.len());
    for (i, slot) in results.into_inner().unwrap().into_iter().enumerate() {
        let e_w = slot.expect("all sweep slots filled")?;
        points.push(SweepPoint {
            step_v: SWEEP_STEPS[i],
            e_w_percent: e_w,
        });
    }
    write_sweep_csv(&out_dir.join("sweep.csv"), &points)?;
    Ok(points)
}

/// Default output directory: `--out-dir`, else `FIVESS_OUT_DIR`, else `.`.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("FIVESS_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}
