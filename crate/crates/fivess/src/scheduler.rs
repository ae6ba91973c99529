//! Gain-scheduled supervisory control for large reference steps: an
//! operating-point grid with one locally designed compensator per point, a
//! step planner that chains sub-steps through overlapping linearized
//! regions, and the settled-down detector that advances the plan.

use serde::{Deserialize, Serialize};

use crate::controller::{design_s2pi, DesignSpec, S2PiController};
use crate::converter::{CircuitParams, CommandSource, CycleRecord, CycleStart, Topology};
use crate::error::{Error, Result};
use crate::model::{boost_plant, buck_plant, OperatingPoint, PlantCoefficients};

/// Discretized operating-point space: grid voltages with the half-width of
/// each point's linearized region. Adjacent regions must overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPointGrid {
    pub voltages: Vec<f64>,
    pub region_radius: f64,
}

impl OperatingPointGrid {
    pub fn new(voltages: Vec<f64>, region_radius: f64) -> Result<Self> {
        if voltages.len() < 2 {
            return Err(Error::InvalidParameter(
                "grid needs at least two operating points".into(),
            ));
        }
        if !(region_radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "region radius must be > 0, got {region_radius}"
            )));
        }
        for w in voltages.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter(
                    "grid voltages must be strictly increasing".into(),
                ));
            }
            if w[1] - w[0] >= 2.0 * region_radius {
                return Err(Error::InvalidParameter(format!(
                    "grid gap {} to {} exceeds the linearized-region overlap",
                    w[0], w[1]
                )));
            }
        }
        Ok(OperatingPointGrid {
            voltages,
            region_radius,
        })
    }

    pub fn span(&self) -> (f64, f64) {
        (self.voltages[0], *self.voltages.last().unwrap())
    }

    fn nearest(&self, v: f64) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, gv) in self.voltages.iter().enumerate() {
            let d = (gv - v).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        best
    }
}

/// Static load: a fixed resistance or a VI characteristic `i = f(v)`.
pub enum LoadModel {
    Resistance(f64),
    /// Differentiable characteristic.
    Characteristic(Box<dyn Fn(f64) -> f64 + Send + Sync>),
    /// Sampled characteristic as sorted (v, i) pairs.
    Tabulated(Vec<(f64, f64)>),
}

impl LoadModel {
    /// Incremental load resistance `1/(di/dv)` at an output voltage; the
    /// small-signal quantity that replaces R in the local plant.
    pub fn effective_resistance(&self, v: f64) -> Result<f64> {
        let slope = match self {
            LoadModel::Resistance(r) => {
                if *r <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "load resistance must be > 0, got {r}"
                    )));
                }
                1.0 / r
            }
            LoadModel::Characteristic(f) => {
                let h = 1e-6 * v.abs().max(1.0);
                (f(v + h) - f(v - h)) / (2.0 * h)
            }
            LoadModel::Tabulated(points) => {
                if points.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "tabulated load needs at least two points".into(),
                    ));
                }
                let h = 1e-6 * v.abs().max(1.0);
                (interp(points, v + h)? - interp(points, v - h)?) / (2.0 * h)
            }
        };
        if slope <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "negative incremental load resistance at {v} V (di/dv = {slope})"
            )));
        }
        Ok(1.0 / slope)
    }
}

fn interp(points: &[(f64, f64)], v: f64) -> Result<f64> {
    let first = points.first().unwrap();
    let last = points.last().unwrap();
    if v <= first.0 {
        let (a, b) = (points[0], points[1]);
        return Ok(a.1 + (v - a.0) * (b.1 - a.1) / (b.0 - a.0));
    }
    if v >= last.0 {
        let (a, b) = (points[points.len() - 2], points[points.len() - 1]);
        return Ok(a.1 + (v - a.0) * (b.1 - a.1) / (b.0 - a.0));
    }
    for w in points.windows(2) {
        if v >= w[0].0 && v <= w[1].0 {
            let (a, b) = (w[0], w[1]);
            return Ok(a.1 + (v - a.0) * (b.1 - a.1) / (b.0 - a.0));
        }
    }
    Err(Error::InvalidParameter("tabulated load not sorted".into()))
}

/// One grid point's local design.
#[derive(Debug, Clone)]
pub struct TableEntry {
    pub voltage: f64,
    pub operating_point: OperatingPoint,
    pub plant: PlantCoefficients,
    pub controller: S2PiController,
}

/// Immutable per-point controller table.
#[derive(Debug, Clone)]
pub struct ControllerTable {
    pub entries: Vec<TableEntry>,
    pub grid: OperatingPointGrid,
}

/// Design one local controller per grid point: incremental load resistance
/// at the point, local plant, compensator, all under the same design spec
/// and command limits.
pub fn build_controller_table(
    params: &CircuitParams,
    grid: &OperatingPointGrid,
    spec: &DesignSpec,
    load: &LoadModel,
    command_limits: (f64, f64),
) -> Result<ControllerTable> {
    let mut entries = Vec::with_capacity(grid.voltages.len());
    for &v in &grid.voltages {
        let build = || -> Result<TableEntry> {
            let r_eff = load.effective_resistance(v)?;
            let mut local = *params;
            local.load_resistance = r_eff;
            let op = OperatingPoint::ideal(&local, v)?;
            let plant = match params.topology {
                Topology::BoostConstantOffTime => boost_plant(&local, &op)?,
                Topology::BuckConstantOnTime => buck_plant(&local, &op)?,
            };
            let controller =
                design_s2pi(&plant, spec)?.with_limits(command_limits.0, command_limits.1);
            Ok(TableEntry {
                voltage: v,
                operating_point: op,
                plant,
                controller,
            })
        };
        entries.push(build().map_err(|e| {
            Error::InvalidParameter(format!("controller table failed at {v} V: {e}"))
        })?);
    }
    Ok(ControllerTable {
        entries,
        grid: grid.clone(),
    })
}

/// Decompose a reference move into grid-point sub-targets ending exactly at
/// `v_to`. Empty for a zero move; each hop stays within the overlap of
/// adjacent linearized regions.
pub fn plan_steps(v_from: f64, v_to: f64, grid: &OperatingPointGrid) -> Result<Vec<f64>> {
    let (lo, hi) = grid.span();
    for (name, v) in [("v_from", v_from), ("v_to", v_to)] {
        if v < lo - grid.region_radius || v > hi + grid.region_radius {
            return Err(Error::Planning(format!(
                "{name} = {v} V outside the grid span [{lo}, {hi}] V"
            )));
        }
    }
    if v_from == v_to {
        return Ok(vec![]);
    }
    let mut targets: Vec<f64> = if v_to > v_from {
        grid.voltages
            .iter()
            .copied()
            .filter(|&v| v > v_from && v < v_to)
            .collect()
    } else {
        let mut t: Vec<f64> = grid
            .voltages
            .iter()
            .copied()
            .filter(|&v| v < v_from && v > v_to)
            .collect();
        t.reverse();
        t
    };
    targets.push(v_to);

    let mut prev = v_from;
    for &t in &targets {
        if (t - prev).abs() > 2.0 * grid.region_radius {
            return Err(Error::Planning(format!(
                "hop {prev} V to {t} V exceeds the linearized-region overlap"
            )));
        }
        prev = t;
    }
    Ok(targets)
}

/// Supervisor phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupervisorPhase {
    Stepping,
    Done,
}

/// Recorded controller handover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub cycle: usize,
    pub from_entry: usize,
    pub to_entry: usize,
    pub new_target: f64,
}

/// Supervisory command source: runs the plan, watches the error sequence,
/// and hands over between local controllers with bumpless reseeding.
pub struct Supervisor {
    table: ControllerTable,
    plan: Vec<f64>,
    plan_idx: usize,
    current_target: f64,
    step_size: f64,
    consecutive_in_band: u32,
    phase: SupervisorPhase,
    active_entry: usize,
    active: S2PiController,
    settle_band: f64,
    settle_count: u32,
    pub switch_events: Vec<SwitchEvent>,
}

/// Settled-down detector defaults: 1 % of the sub-step for 5 consecutive
/// cycles.
pub const DEFAULT_SUPERVISOR_BAND: f64 = 0.01;
pub const DEFAULT_SUPERVISOR_COUNT: u32 = 5;

impl Supervisor {
    /// Start a plan from `v_start`, regulating with the entry nearest the
    /// starting point; the handover to the first sub-target's controller
    /// is recorded as a switch on the first cycle.
    pub fn new(
        table: ControllerTable,
        v_start: f64,
        plan: Vec<f64>,
        initial_command: f64,
        settle_band: f64,
        settle_count: u32,
    ) -> Result<Self> {
        if plan.is_empty() {
            return Err(Error::Planning("empty supervisor plan".into()));
        }
        let current_target = plan[0];
        let active_entry = table.grid.nearest(v_start);
        let mut active = table.entries[active_entry].controller;
        active.reseed(initial_command, 0.0);
        Ok(Supervisor {
            table,
            plan,
            plan_idx: 0,
            current_target,
            step_size: (current_target - v_start).abs(),
            consecutive_in_band: 0,
            phase: SupervisorPhase::Stepping,
            active_entry,
            active,
            settle_band,
            settle_count,
            switch_events: Vec::new(),
        })
    }

    pub fn phase(&self) -> SupervisorPhase {
        self.phase
    }

    pub fn current_target(&self) -> f64 {
        self.current_target
    }

    pub fn active_entry(&self) -> usize {
        self.active_entry
    }

    /// Hand the loop to the entry serving the current target, bumplessly.
    fn switch_to_target_entry(&mut self, cycle: usize) {
        let next_entry = self.table.grid.nearest(self.current_target);
        if next_entry == self.active_entry {
            return;
        }
        let last_cmd = self.active.last_output();
        let mut next = self.table.entries[next_entry].controller;
        // Seed with the running command and a cleared error memory: the
        // handover command jump is then exactly one ordinary update of
        // the incoming controller on the fresh error.
        next.reseed(last_cmd, 0.0);
        self.switch_events.push(SwitchEvent {
            cycle,
            from_entry: self.active_entry,
            to_entry: next_entry,
            new_target: self.current_target,
        });
        self.active_entry = next_entry;
        self.active = next;
    }

    /// Advance the settled-down detector and, once it fires, move to the
    /// next sub-target with a bumpless controller handover.
    fn advance(&mut self, cycle: usize, sample: f64) {
        if self.phase == SupervisorPhase::Done {
            return;
        }
        if cycle == 0 {
            self.switch_to_target_entry(0);
        }
        let band = self.settle_band * self.step_size.max(f64::MIN_POSITIVE);
        if (sample - self.current_target).abs() <= band {
            self.consecutive_in_band += 1;
        } else {
            self.consecutive_in_band = 0;
        }
        if self.consecutive_in_band < self.settle_count {
            return;
        }
        self.consecutive_in_band = 0;
        if self.plan_idx + 1 >= self.plan.len() {
            self.phase = SupervisorPhase::Done;
            return;
        }
        let old_target = self.current_target;
        self.plan_idx += 1;
        self.current_target = self.plan[self.plan_idx];
        self.step_size = (self.current_target - old_target).abs();
        self.switch_to_target_entry(cycle);
    }
}

impl CommandSource for Supervisor {
    fn command(&mut self, ctx: &CycleStart<'_>) -> f64 {
        self.advance(ctx.n, ctx.v_sample);
        self.active.step(self.current_target - ctx.v_sample)
    }

    fn finished(&self, _history: &[CycleRecord]) -> bool {
        self.phase == SupervisorPhase::Done
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    fn grid() -> OperatingPointGrid {
        OperatingPointGrid::new(vec![20.0, 25.0, 30.0, 35.0, 40.0], 2.6).unwrap()
    }

    #[test]
    fn grid_requires_overlap() {
        assert!(OperatingPointGrid::new(vec![20.0, 25.0], 2.5).is_err());
        assert!(OperatingPointGrid::new(vec![20.0, 25.0], 2.6).is_ok());
        assert!(OperatingPointGrid::new(vec![20.0, 20.0], 3.0).is_err());
    }

    #[test]
    fn staircase_plan_upward() {
        let plan = plan_steps(20.0, 40.0, &grid()).unwrap();
        assert_eq!(plan, vec![25.0, 30.0, 35.0, 40.0]);
    }

    #[test]
    fn staircase_plan_downward_is_reversed() {
        let plan = plan_steps(40.0, 20.0, &grid()).unwrap();
        assert_eq!(plan, vec![35.0, 30.0, 25.0, 20.0]);
    }

    #[test]
    fn zero_move_plans_nothing() {
        assert!(plan_steps(30.0, 30.0, &grid()).unwrap().is_empty());
    }

    #[test]
    fn out_of_span_rejected() {
        assert!(plan_steps(20.0, 50.0, &grid()).is_err());
    }

    #[test]
    fn linear_load_has_constant_effective_resistance() {
        let r = 100.0;
        let load = LoadModel::Characteristic(Box::new(move |v| v / r));
        for v in [10.0, 25.0, 40.0] {
            assert_relative_eq!(load.effective_resistance(v).unwrap(), r, max_relative = 1e-9);
        }
    }

    #[test]
    fn quadratic_load_hand_value() {
        // i = 0.4 (v/40)^2: di/dv at 40 = 2*0.4/40 = 0.02, r = 50 ohm.
        let load = LoadModel::Characteristic(Box::new(|v: f64| 0.4 * (v / 40.0) * (v / 40.0)));
        assert_relative_eq!(load.effective_resistance(40.0).unwrap(), 50.0, max_relative = 1e-6);
    }

    #[test]
    fn tabulated_linear_load_matches_resistance() {
        let points: Vec<(f64, f64)> = (0..50)
            .map(|k| {
                let v = 10.0 + k as f64;
                (v, v / 100.0)
            })
            .collect();
        let load = LoadModel::Tabulated(points);
        assert_relative_eq!(
            load.effective_resistance(25.3).unwrap(),
            100.0,
            max_relative = 1e-6
        );
    }

    #[test]
    fn negative_incremental_resistance_rejected() {
        let load = LoadModel::Characteristic(Box::new(|v: f64| 1.0 / v));
        assert!(load.effective_resistance(10.0).is_err());
    }

    #[test]
    fn table_single_point_matches_direct_design() {
        let p = presets::table2_boost();
        let grid = OperatingPointGrid::new(vec![39.0, 40.0], 2.0).unwrap();
        let load = LoadModel::Resistance(p.load_resistance);
        let table =
            build_controller_table(&p, &grid, &DesignSpec::default(), &load, (0.0, 50.0)).unwrap();
        let op = OperatingPoint::ideal(&p, 40.0).unwrap();
        let plant = boost_plant(&p, &op).unwrap();
        let direct = design_s2pi(&plant, &DesignSpec::default()).unwrap();
        let entry = &table.entries[1];
        assert_relative_eq!(entry.controller.gain, direct.gain);
        assert_relative_eq!(entry.controller.zero, direct.zero);
    }

    #[test]
    fn table_rejects_non_ccm_grid_point() {
        let p = presets::table2_boost();
        let grid = OperatingPointGrid::new(vec![11.0, 12.5], 1.0).unwrap();
        let load = LoadModel::Resistance(p.load_resistance);
        let err = build_controller_table(&p, &grid, &DesignSpec::default(), &load, (0.0, 50.0));
        assert!(err.is_err());
        let msg = format!("{}", err.unwrap_err());
        assert!(msg.contains("11"), "error should name the grid point: {msg}");
    }
}
