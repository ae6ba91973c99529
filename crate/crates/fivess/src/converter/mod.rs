//! Exact event-driven simulation of constant on/off-time current-mode
//! converters: per-phase affine propagation, comparator event solving,
//! lambda-offset sampling and whole-cycle stepping.

mod events;
mod params;
mod phase;
mod sim;

pub use events::{solve_boost_on_time, solve_buck_off_time, EventSolution, DEFAULT_TIME_TOL};
pub use params::{
    CircuitParams, ContinuousState, SwitchPhase, Topology, DEFAULT_MIN_CONTROLLED_TIME,
};
pub use phase::{phase_model, propagate_exact, propagate_quadratic, quadratic_transition, PhaseModel};
pub use sim::{
    command_for_voltage, find_equilibrium, run_cycle, sample_state, simulate, CommandSource,
    ConstantCommand, CycleRecord, CycleStart, Equilibrium, SimOptions, Termination, Trace,
    TracePoint,
};
