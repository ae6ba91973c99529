//! Event-driven cycle stepping and whole-run simulation.
//!
//! A cycle starts at the controlled current extreme (boost: peak, buck:
//! valley), runs the fixed interval first (boost: off, buck: on) with the
//! single lambda-offset voltage sample inside it, then the comparator-
//! controlled interval up to the commanded current extreme.

use serde::{Deserialize, Serialize};

use crate::converter::events::{
    solve_boost_on_time, solve_buck_off_time, EventSolution, DEFAULT_TIME_TOL,
};
use crate::converter::params::{CircuitParams, ContinuousState, SwitchPhase, Topology};
use crate::converter::phase::{phase_model, propagate_exact, PhaseModel};
use crate::error::{Error, Result};

/// Everything the simulator records about one switching cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    /// Cycle index.
    pub n: usize,
    /// Time of the current-extreme event that ends this cycle, seconds.
    pub t_event: f64,
    /// Time of the voltage sample, seconds.
    pub t_sample: f64,
    /// Sampled output voltage, volts.
    pub v_sample: f64,
    /// Achieved current extreme at the end of the cycle (peak for boost,
    /// valley for buck), amperes.
    pub i_extreme: f64,
    /// Duration of the comparator-controlled interval, seconds.
    pub controlled_duration: f64,
    /// True when the actuator floor cut the controlled interval short.
    pub clamped: bool,
}

impl CycleRecord {
    /// Full switching period of this cycle, seconds.
    pub fn period(&self, params: &CircuitParams) -> f64 {
        params.fixed_time + self.controlled_duration
    }
}

/// One dense output point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub v: f64,
    pub i_l: f64,
    pub switch_state: u8,
    pub cycle: usize,
}

/// How a simulation run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// The command source declared the scenario finished.
    Completed,
    /// The output voltage left the CCM region; the trace stops there.
    CcmViolation,
    /// The cycle budget ran out first.
    MaxCycles,
}

/// Simulation output: dense samples plus the per-cycle records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub points: Vec<TracePoint>,
    pub cycles: Vec<CycleRecord>,
    pub termination: Termination,
    /// State at the final cycle boundary.
    pub final_state: ContinuousState,
}

impl Trace {
    /// Sampled voltage sequence v[n].
    pub fn sampled_voltages(&self) -> Vec<f64> {
        self.cycles.iter().map(|c| c.v_sample).collect()
    }

    /// Achieved current extremes i[n].
    pub fn current_extremes(&self) -> Vec<f64> {
        self.cycles.iter().map(|c| c.i_extreme).collect()
    }
}

/// What a command source sees at the moment its command is due: the fresh
/// voltage sample of the running cycle plus everything recorded so far.
#[derive(Debug)]
pub struct CycleStart<'a> {
    pub n: usize,
    /// Voltage sample of this cycle, volts.
    pub v_sample: f64,
    /// Sample time, seconds.
    pub t_sample: f64,
    /// State at the cycle boundary that opened this cycle.
    pub boundary_state: ContinuousState,
    pub history: &'a [CycleRecord],
}

/// Per-cycle current command: constant, compensated closed loop, or a
/// supervisory scheduler.
pub trait CommandSource {
    /// Current-extreme command for the cycle described by `ctx`. Called once
    /// per cycle, after the cycle's voltage sample is available.
    fn command(&mut self, ctx: &CycleStart<'_>) -> f64;

    /// Lets a source end the run early (for example once a supervisor has
    /// finished its plan). Checked after every cycle.
    fn finished(&self, _history: &[CycleRecord]) -> bool {
        false
    }
}

/// Fixed current command.
#[derive(Debug, Clone, Copy)]
pub struct ConstantCommand(pub f64);

impl CommandSource for ConstantCommand {
    fn command(&mut self, _ctx: &CycleStart<'_>) -> f64 {
        self.0
    }
}

/// Simulation controls.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub max_cycles: usize,
    /// Dense output resolution per fixed interval; events are always emitted
    /// exactly regardless of this value.
    pub points_per_interval: u32,
    /// Root tolerance for the buck valley event, seconds.
    pub time_tol: f64,
    /// Skip dense points entirely (cycle records are always kept).
    pub dense: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_cycles: 10_000,
            points_per_interval: 16,
            time_tol: DEFAULT_TIME_TOL,
            dense: true,
        }
    }
}

struct CyclePhases {
    first: PhaseModel,
    second: PhaseModel,
    first_state: u8,
    second_state: u8,
}

fn cycle_phases(params: &CircuitParams) -> CyclePhases {
    match params.topology {
        Topology::BoostConstantOffTime => CyclePhases {
            first: phase_model(params, SwitchPhase::Off),
            second: phase_model(params, SwitchPhase::On),
            first_state: SwitchPhase::Off.as_u8(),
            second_state: SwitchPhase::On.as_u8(),
        },
        Topology::BuckConstantOnTime => CyclePhases {
            first: phase_model(params, SwitchPhase::On),
            second: phase_model(params, SwitchPhase::Off),
            first_state: SwitchPhase::On.as_u8(),
            second_state: SwitchPhase::Off.as_u8(),
        },
    }
}

/// State at the sampling instant of the cycle that starts at `x`.
///
/// The fixed interval leading up to the sample is autonomous, so the sample
/// can be computed before the cycle's command is known.
pub fn sample_state(x: &ContinuousState, params: &CircuitParams) -> ContinuousState {
    let ph = cycle_phases(params);
    propagate_exact(x, &ph.first, params.lambda * params.fixed_time)
}

fn emit_segment(
    points: &mut Vec<TracePoint>,
    x0: &ContinuousState,
    pm: &PhaseModel,
    duration: f64,
    switch_state: u8,
    cycle: usize,
    params: &CircuitParams,
    ppi: u32,
) {
    if duration <= 0.0 {
        return;
    }
    let n = ((ppi as f64 * duration / params.fixed_time).round() as usize).max(1);
    for k in 0..n {
        let tau = duration * k as f64 / n as f64;
        let s = propagate_exact(x0, pm, tau);
        points.push(TracePoint {
            t: s.t,
            v: s.v,
            i_l: s.i_l,
            switch_state,
            cycle,
        });
    }
}

struct CycleOutcome {
    end: ContinuousState,
    record: CycleRecord,
}

fn step_cycle(
    x: &ContinuousState,
    command: f64,
    params: &CircuitParams,
    time_tol: f64,
    n: usize,
    trace: Option<(&mut Vec<TracePoint>, u32)>,
) -> Result<CycleOutcome> {
    let ph = cycle_phases(params);
    let lam_t = params.lambda * params.fixed_time;
    let rest_t = params.fixed_time - lam_t;

    let at_sample = propagate_exact(x, &ph.first, lam_t);
    at_sample.check_ccm()?;
    let fixed_end = propagate_exact(&at_sample, &ph.first, rest_t);
    fixed_end.check_ccm()?;

    let EventSolution { duration, clamped } = match params.topology {
        Topology::BoostConstantOffTime => solve_boost_on_time(&fixed_end, command, params)?,
        Topology::BuckConstantOnTime => {
            solve_buck_off_time(&fixed_end, command, params, time_tol)?
        }
    };
    let end = propagate_exact(&fixed_end, &ph.second, duration);
    end.check_ccm()?;

    if let Some((points, ppi)) = trace {
        emit_segment(points, x, &ph.first, params.fixed_time, ph.first_state, n, params, ppi);
        emit_segment(points, &fixed_end, &ph.second, duration, ph.second_state, n, params, ppi);
    }

    Ok(CycleOutcome {
        end,
        record: CycleRecord {
            n,
            t_event: end.t,
            t_sample: at_sample.t,
            v_sample: at_sample.v,
            i_extreme: end.i_l,
            controlled_duration: duration,
            clamped,
        },
    })
}

/// Advance exactly one switching cycle from the boundary state `x` with the
/// given current command. Returns the next boundary state and the cycle
/// record (indexed 0; `simulate` renumbers).
pub fn run_cycle(
    x: &ContinuousState,
    command: f64,
    params: &CircuitParams,
) -> Result<(ContinuousState, CycleRecord)> {
    let out = step_cycle(x, command, params, DEFAULT_TIME_TOL, 0, None)?;
    Ok((out.end, out.record))
}

/// Run a full scenario: repeatedly sample, ask the source for the cycle's
/// command, and step. Deterministic: identical inputs give bit-identical
/// traces. CCM violations end the trace and are recorded, not raised.
pub fn simulate(
    params: &CircuitParams,
    x0: ContinuousState,
    source: &mut dyn CommandSource,
    opts: &SimOptions,
) -> Trace {
    let mut points = Vec::new();
    let mut cycles: Vec<CycleRecord> = Vec::with_capacity(opts.max_cycles.min(1 << 16));
    let mut x = x0;
    let mut termination = Termination::MaxCycles;

    for n in 0..opts.max_cycles {
        let at_sample = sample_state(&x, params);
        if at_sample.v <= 0.0 {
            termination = Termination::CcmViolation;
            break;
        }
        let ctx = CycleStart {
            n,
            v_sample: at_sample.v,
            t_sample: at_sample.t,
            boundary_state: x,
            history: &cycles,
        };
        let command = source.command(&ctx);
        let trace_sink = opts.dense.then_some((&mut points, opts.points_per_interval));
        match step_cycle(&x, command, params, opts.time_tol, n, trace_sink) {
            Ok(out) => {
                x = out.end;
                cycles.push(out.record);
            }
            Err(Error::CcmViolation { .. }) => {
                termination = Termination::CcmViolation;
                break;
            }
            Err(_) => {
                termination = Termination::CcmViolation;
                break;
            }
        }
        if source.finished(&cycles) {
            termination = Termination::Completed;
            break;
        }
    }

    if opts.dense {
        points.push(TracePoint {
            t: x.t,
            v: x.v,
            i_l: x.i_l,
            switch_state: cycle_phases(params).first_state,
            cycle: cycles.len(),
        });
    }

    Trace {
        points,
        cycles,
        termination,
        final_state: x,
    }
}

/// A converged open-loop operating point of the cycle map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    /// Boundary state at the current extreme (time zeroed).
    pub boundary_state: ContinuousState,
    /// Steady switching period, seconds.
    pub period: f64,
    /// Steady sampled voltage, volts.
    pub v_sample: f64,
    /// Steady current extreme, amperes.
    pub i_extreme: f64,
    /// Steady controlled interval, seconds.
    pub controlled_duration: f64,
}

/// Analytic first guess for the boundary state under a constant command.
fn equilibrium_guess(params: &CircuitParams, command: f64) -> ContinuousState {
    match params.topology {
        Topology::BoostConstantOffTime => {
            // I_p = V^2/(R V_in) + (V - V_in) T_off / (2L), solved for V.
            let a = 1.0 / (params.load_resistance * params.v_in);
            let b = params.fixed_time / (2.0 * params.inductance);
            let c = -(command + params.v_in * b);
            let v = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
            ContinuousState::new(v.max(params.v_in * 1.01), command, 0.0)
        }
        Topology::BuckConstantOnTime => {
            // I_v = V/R - T_on (V_in - V) / (2L), solved for V.
            let denom = 1.0 / params.load_resistance + params.fixed_time / (2.0 * params.inductance);
            let v = (command + params.fixed_time * params.v_in / (2.0 * params.inductance)) / denom;
            ContinuousState::new(v.max(params.v_in * 1e-3), command, 0.0)
        }
    }
}

/// Iterate the cycle map under a constant command until it reaches its fixed
/// point. The map is contractive for open-loop-stable CCM designs.
pub fn find_equilibrium(
    params: &CircuitParams,
    command: f64,
    max_cycles: usize,
    rel_tol: f64,
) -> Result<Equilibrium> {
    let mut x = equilibrium_guess(params, command);
    let mut last: Option<CycleRecord> = None;
    for _ in 0..max_cycles {
        let (next, rec) = run_cycle(&x, command, params)?;
        let converged = match last {
            Some(prev) => {
                let dv = (next.v - x.v).abs() <= rel_tol * x.v.abs();
                let di = (next.i_l - x.i_l).abs() <= rel_tol * x.i_l.abs().max(1e-12);
                let dd = (rec.controlled_duration - prev.controlled_duration).abs()
                    <= rel_tol * prev.controlled_duration.max(1e-30);
                dv && di && dd
            }
            None => false,
        };
        last = Some(rec);
        x = ContinuousState::new(next.v, next.i_l, 0.0);
        if converged {
            let rec = last.unwrap();
            return Ok(Equilibrium {
                boundary_state: x,
                period: params.fixed_time + rec.controlled_duration,
                v_sample: rec.v_sample,
                i_extreme: rec.i_extreme,
                controlled_duration: rec.controlled_duration,
            });
        }
    }
    Err(Error::InvalidParameter(format!(
        "no open-loop fixed point within {max_cycles} cycles for command {command}"
    )))
}

/// Constant command whose open-loop equilibrium samples at `v_target`.
pub fn command_for_voltage(params: &CircuitParams, v_target: f64) -> Result<f64> {
    if params.topology.is_boost() && v_target <= params.v_in {
        return Err(Error::Topology(format!(
            "boost output {v_target} V must exceed the {} V input",
            params.v_in
        )));
    }
    if params.topology.is_buck() && v_target >= params.v_in {
        return Err(Error::Topology(format!(
            "buck output {v_target} V must stay below the {} V input",
            params.v_in
        )));
    }
    // Analytic seed, then secant on the simulated sample voltage.
    let mut c0 = match params.topology {
        Topology::BoostConstantOffTime => {
            v_target * v_target / (params.load_resistance * params.v_in)
                + (v_target - params.v_in) * params.fixed_time / (2.0 * params.inductance)
        }
        Topology::BuckConstantOnTime => {
            v_target / params.load_resistance
                - params.fixed_time * (params.v_in - v_target) / (2.0 * params.inductance)
        }
    };
    let eval = |c: f64| -> Result<f64> {
        Ok(find_equilibrium(params, c, 20_000, 1e-13)?.v_sample - v_target)
    };
    let mut f0 = eval(c0)?;
    let mut c1 = c0 * 1.001 + 1e-9;
    let mut f1 = eval(c1)?;
    for _ in 0..40 {
        if f1.abs() <= 1e-10 * v_target {
            return Ok(c1);
        }
        let denom = f1 - f0;
        if denom == 0.0 {
            break;
        }
        let c2 = c1 - f1 * (c1 - c0) / denom;
        c0 = c1;
        f0 = f1;
        c1 = c2;
        f1 = eval(c1)?;
    }
    if f1.abs() <= 1e-7 * v_target {
        Ok(c1)
    } else {
        Err(Error::InvalidParameter(format!(
            "command search for {v_target} V did not converge (residual {f1:.3e})"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    #[test]
    fn sample_timestamp_is_lambda_offset() {
        let p = presets::table2_boost();
        let x = ContinuousState::new(40.0, 1.75, 0.0);
        let (_, rec) = run_cycle(&x, 1.75, &p).unwrap();
        assert_relative_eq!(rec.t_sample, p.lambda * p.fixed_time, max_relative = 1e-15);
    }

    #[test]
    fn boost_steady_state_on_time_from_volt_second_balance() {
        // Table-style boost at 40 V: t_on = T_off (V - V_in)/V_in = 466.7 ns.
        let p = presets::table2_boost();
        let cmd = command_for_voltage(&p, 40.0).unwrap();
        let eq = find_equilibrium(&p, cmd, 20_000, 1e-13).unwrap();
        let expected = p.fixed_time * (eq.v_sample - p.v_in) / p.v_in;
        assert_relative_eq!(eq.controlled_duration, expected, max_relative = 1e-3);
    }

    #[test]
    fn boost_cycle_period_at_20v() {
        // Period T = T_off * V/V_in = 333.3 ns at 20 V, i.e. 3 MHz.
        let p = presets::table2_boost();
        let cmd = command_for_voltage(&p, 20.0).unwrap();
        let eq = find_equilibrium(&p, cmd, 20_000, 1e-13).unwrap();
        assert_relative_eq!(eq.period, 333.333e-9, max_relative = 0.02);
    }

    #[test]
    fn fixed_point_duration_is_reproduced() {
        let p = presets::table2_boost();
        let cmd = command_for_voltage(&p, 40.0).unwrap();
        let eq = find_equilibrium(&p, cmd, 20_000, 1e-14).unwrap();
        let mut src = ConstantCommand(cmd);
        let trace = simulate(
            &p,
            eq.boundary_state,
            &mut src,
            &SimOptions {
                max_cycles: 50,
                dense: false,
                ..SimOptions::default()
            },
        );
        let d: Vec<f64> = trace.cycles.iter().map(|c| c.controlled_duration).collect();
        let a = d[d.len() - 2];
        let b = d[d.len() - 1];
        assert!((a - b).abs() <= 1e-12 * a, "durations drift: {a} vs {b}");
    }

    #[test]
    fn equilibrium_trace_has_no_voltage_drift() {
        let p = presets::table2_boost();
        let cmd = command_for_voltage(&p, 40.0).unwrap();
        let eq = find_equilibrium(&p, cmd, 20_000, 1e-14).unwrap();
        let mut src = ConstantCommand(cmd);
        let trace = simulate(
            &p,
            eq.boundary_state,
            &mut src,
            &SimOptions {
                max_cycles: 1000,
                dense: false,
                ..SimOptions::default()
            },
        );
        let v = trace.sampled_voltages();
        let drift = (v[999] - v[99]).abs() / 900.0;
        assert!(drift < 1e-9, "v[n] drifts {drift} V/cycle");
    }

    #[test]
    fn trace_time_strictly_increases_and_states_flip_at_events() {
        let p = presets::table2_boost();
        let cmd = command_for_voltage(&p, 40.0).unwrap();
        let eq = find_equilibrium(&p, cmd, 20_000, 1e-13).unwrap();
        let mut src = ConstantCommand(cmd);
        let trace = simulate(
            &p,
            eq.boundary_state,
            &mut src,
            &SimOptions {
                max_cycles: 20,
                ..SimOptions::default()
            },
        );
        for w in trace.points.windows(2) {
            assert!(w[1].t > w[0].t, "time not strictly increasing");
        }
        // Switch state flips exactly twice per cycle.
        let flips = trace
            .points
            .windows(2)
            .filter(|w| w[0].switch_state != w[1].switch_state)
            .count();
        assert_eq!(flips, 2 * 20);
    }

    #[test]
    fn simulate_is_deterministic() {
        let p = presets::table1_buck();
        let cmd = command_for_voltage(&p, 1.8).unwrap();
        let eq = find_equilibrium(&p, cmd, 20_000, 1e-13).unwrap();
        let run = || {
            let mut src = ConstantCommand(cmd * 1.02);
            simulate(
                &p,
                eq.boundary_state,
                &mut src,
                &SimOptions {
                    max_cycles: 200,
                    ..SimOptions::default()
                },
            )
        };
        let a = run();
        let b = run();
        assert_eq!(a.points.len(), b.points.len());
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert!(pa.t == pb.t && pa.v == pb.v && pa.i_l == pb.i_l);
        }
    }

    #[test]
    fn buck_steady_frequency_matches_duty_relation() {
        // f = V_out/(V_in T_on); lossless Table-style buck at 1.8 V gives
        // 2.25 MHz.
        let p = presets::table1_buck();
        let cmd = command_for_voltage(&p, 1.8).unwrap();
        let eq = find_equilibrium(&p, cmd, 20_000, 1e-13).unwrap();
        let f = 1.0 / eq.period;
        assert_relative_eq!(f, 2.25e6, max_relative = 0.02);
    }

    #[test]
    fn ccm_violation_recorded_not_raised() {
        let mut p = presets::table1_buck();
        p.min_controlled_time = 0.0;
        // Commanding a deeply negative valley drags the output to zero.
        let mut src = ConstantCommand(-60.0);
        let x = ContinuousState::new(1.8, 11.0, 0.0);
        let trace = simulate(
            &p,
            x,
            &mut src,
            &SimOptions {
                max_cycles: 5000,
                dense: false,
                ..SimOptions::default()
            },
        );
        assert_eq!(trace.termination, Termination::CcmViolation);
    }
}
