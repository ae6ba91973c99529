//! Scenario configuration: a TOML tree with schema validation, preset
//! expansion and a normalizing emitter.

use serde::{Deserialize, Serialize};

use crate::controller::{DesignSpec, S2PiController};
use crate::converter::CircuitParams;
use crate::error::{Error, Result};
use crate::presets;
use crate::scenario::{large_step_spec, DEFAULT_COMMAND_LIMITS};

/// Top-level scenario configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Seed for randomized certificate suites.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub params: ParamsConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub outputs: OutputsConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
}

fn default_seed() -> u64 {
    42
}

/// Circuit parameters, either by preset name or fully explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamsConfig {
    Preset { preset: String },
    Explicit(CircuitParams),
}

impl ParamsConfig {
    pub fn resolve(&self) -> Result<CircuitParams> {
        match self {
            ParamsConfig::Preset { preset } => presets::by_name(preset)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown preset '{preset}'; available: {}",
                        presets::PRESET_NAMES.join(", ")
                    ))
                })?
                .validated(),
            ParamsConfig::Explicit(p) => p.validated(),
        }
    }

    /// Presets expand to their explicit parameters when normalized.
    pub fn normalized(&self) -> Result<ParamsConfig> {
        Ok(ParamsConfig::Explicit(self.resolve()?))
    }
}

/// Compensator: explicit gains or a design request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControllerConfig {
    Explicit {
        gain: f64,
        zero: f64,
        pole: f64,
        #[serde(default = "default_command_min")]
        command_min: f64,
        #[serde(default = "default_command_max")]
        command_max: f64,
    },
    Design {
        #[serde(default)]
        max_overshoot: Option<f64>,
        #[serde(default)]
        max_gain: Option<f64>,
        #[serde(default)]
        target_settling_cycles: Option<u32>,
        #[serde(default = "default_command_min")]
        command_min: f64,
        #[serde(default = "default_command_max")]
        command_max: f64,
    },
}

fn default_command_min() -> f64 {
    DEFAULT_COMMAND_LIMITS.0
}

fn default_command_max() -> f64 {
    DEFAULT_COMMAND_LIMITS.1
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig::Design {
            max_overshoot: None,
            max_gain: Some(crate::scenario::LARGE_STEP_GAIN_CAP),
            target_settling_cycles: None,
            command_min: default_command_min(),
            command_max: default_command_max(),
        }
    }
}

impl ControllerConfig {
    pub fn command_limits(&self) -> (f64, f64) {
        match self {
            ControllerConfig::Explicit {
                command_min,
                command_max,
                ..
            }
            | ControllerConfig::Design {
                command_min,
                command_max,
                ..
            } => (*command_min, *command_max),
        }
    }

    /// Design constraints when this is a design request.
    pub fn design_spec(&self) -> DesignSpec {
        match self {
            ControllerConfig::Explicit { .. } => large_step_spec(),
            ControllerConfig::Design {
                max_overshoot,
                max_gain,
                target_settling_cycles,
                ..
            } => {
                let base = large_step_spec();
                DesignSpec {
                    max_overshoot: max_overshoot.unwrap_or(base.max_overshoot),
                    max_gain: max_gain.or(base.max_gain),
                    target_settling_cycles: *target_settling_cycles,
                    ..base
                }
            }
        }
    }

    pub fn explicit_controller(&self) -> Option<S2PiController> {
        match self {
            ControllerConfig::Explicit {
                gain,
                zero,
                pole,
                command_min,
                command_max,
            } => Some(S2PiController::new(*gain, *zero, *pole).with_limits(*command_min, *command_max)),
            ControllerConfig::Design { .. } => None,
        }
    }
}

/// What to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScenarioKind {
    OpenLoop {
        command: f64,
        #[serde(default = "default_open_loop_cycles")]
        cycles: usize,
    },
    ReferenceStep {
        v_from: f64,
        v_to: f64,
        #[serde(default = "default_step_cycles")]
        max_cycles: usize,
    },
    Staircase {
        v_start: f64,
        targets: Vec<f64>,
        #[serde(default = "default_region_radius")]
        region_radius: f64,
        #[serde(default = "default_staircase_cycles")]
        max_cycles: usize,
    },
    LoadStep {
        v_ref: f64,
        r_to: f64,
        #[serde(default = "default_pre_cycles")]
        pre_cycles: usize,
        #[serde(default = "default_step_cycles")]
        post_cycles: usize,
    },
}

fn default_open_loop_cycles() -> usize {
    2000
}

fn default_step_cycles() -> usize {
    4000
}

fn default_staircase_cycles() -> usize {
    40_000
}

fn default_pre_cycles() -> usize {
    400
}

/// Half-width of a grid point's linearized region, volts: half of the
/// voltage-step range over which the cycle model stays within one percent.
fn default_region_radius() -> f64 {
    2.6
}

impl ScenarioKind {
    /// Operating voltage a design or certificate should anchor to.
    pub fn design_voltage(&self) -> Option<f64> {
        match self {
            ScenarioKind::OpenLoop { .. } => None,
            ScenarioKind::ReferenceStep { v_to, .. } => Some(*v_to),
            ScenarioKind::Staircase { targets, .. } => targets.last().copied(),
            ScenarioKind::LoadStep { v_ref, .. } => Some(*v_ref),
        }
    }
}

/// Output locations and trace resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "default_ppi")]
    pub points_per_interval: u32,
    #[serde(default = "default_trace_name")]
    pub trace: String,
    #[serde(default = "default_cycles_name")]
    pub cycles: String,
    #[serde(default = "default_summary_name")]
    pub summary: String,
}

fn default_ppi() -> u32 {
    16
}

fn default_trace_name() -> String {
    "trace.csv".into()
}

fn default_cycles_name() -> String {
    "cycles.csv".into()
}

fn default_summary_name() -> String {
    "summary.json".into()
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            points_per_interval: default_ppi(),
            trace: default_trace_name(),
            cycles: default_cycles_name(),
            summary: default_summary_name(),
        }
    }
}

/// Inputs for the certificate command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    /// Current-block gain bound for the large-signal certificates; supplied
    /// by the caller because it is defined by a characteristic curve, not a
    /// formula.
    #[serde(default = "default_g_ab")]
    pub g_ab: f64,
    /// Bounds on the comparator-controlled interval, seconds.
    #[serde(default = "default_ctrl_min")]
    pub controlled_time_min: f64,
    #[serde(default = "default_ctrl_max")]
    pub controlled_time_max: f64,
    /// Randomized scenarios per bound suite.
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Optional sector-bound inputs: interference bandwidth (Hz), amplitude
    /// (A) and loop constant (s/A).
    #[serde(default)]
    pub sector: Option<SectorConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorConfig {
    pub f_ub: f64,
    pub a_ub: f64,
    pub g0: f64,
}

fn default_g_ab() -> f64 {
    0.5
}

fn default_ctrl_min() -> f64 {
    20e-9
}

fn default_ctrl_max() -> f64 {
    2e-6
}

fn default_runs() -> usize {
    100
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            g_ab: default_g_ab(),
            controlled_time_min: default_ctrl_min(),
            controlled_time_max: default_ctrl_max(),
            runs: default_runs(),
            sector: None,
        }
    }
}

/// Parse and validate a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Parse and validate configuration text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.params.resolve()?;
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ScenarioConfig) -> Result<()> {
    match &cfg.scenario {
        ScenarioKind::Staircase { targets, .. } if targets.is_empty() => {
            Err(Error::Config("staircase needs at least one target".into()))
        }
        ScenarioKind::LoadStep { r_to, .. } if *r_to <= 0.0 => Err(Error::Config(format!(
            "load step resistance must be > 0, got {r_to}"
        ))),
        _ => Ok(()),
    }
}

/// Serialize a normalized form: presets expanded, defaults filled.
pub fn emit_config(cfg: &ScenarioConfig) -> Result<String> {
    let normalized = ScenarioConfig {
        params: cfg.params.normalized()?,
        ..cfg.clone()
    };
    toml::to_string_pretty(&normalized).map_err(|e| Error::Config(e.to_string()))
}
