//! Batch front end: scenario configs, CSV/JSON emission, and the command
//! implementations behind the `fivess` binary.

mod commands;
mod config;
mod csv;

pub use commands::{
    cmd_certify, cmd_design, cmd_simulate, cmd_sweep, resolve_controller, resolve_out_dir,
    CertifyReport, DesignReport, LoadStepSummary, Provenance, RunSummary, TransitionSummary,
    SWEEP_STEPS,
};
pub use config::{
    emit_config, load_config, parse_config, CertifyConfig, ControllerConfig, OutputsConfig,
    ParamsConfig, ScenarioConfig, ScenarioKind, SectorConfig,
};
pub use csv::{
    format_sig, read_cycles_csv, read_trace_csv, round_trace, roundtrip_sig, write_cycles_csv,
    write_sweep_csv, write_trace_csv,
};
