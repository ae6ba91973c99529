use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converter topology together with its control style.
///
/// Each topology fixes one switch interval and lets a current comparator
/// terminate the other: the buck holds the on-time constant and actuates the
/// valley current, the boost holds the off-time constant and actuates the
/// peak current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    BuckConstantOnTime,
    BoostConstantOffTime,
}

impl Topology {
    pub fn is_buck(self) -> bool {
        matches!(self, Topology::BuckConstantOnTime)
    }

    pub fn is_boost(self) -> bool {
        matches!(self, Topology::BoostConstantOffTime)
    }
}

/// State of the main switch S1. `On` means S1 conducts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchPhase {
    Off,
    On,
}

impl SwitchPhase {
    pub fn as_u8(self) -> u8 {
        match self {
            SwitchPhase::Off => 0,
            SwitchPhase::On => 1,
        }
    }
}

/// Physical description of one converter.
///
/// `fixed_time` is the constant interval of the topology (on-time for the
/// buck, off-time for the boost); the other interval is set every cycle by
/// the current comparator, floored at `min_controlled_time`. `lambda` places
/// the single voltage sample inside the fixed interval, strictly between the
/// bounding switching events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    pub topology: Topology,
    /// Input voltage, volts.
    pub v_in: f64,
    /// Inductance, henries.
    pub inductance: f64,
    /// Output capacitance, farads.
    pub capacitance: f64,
    /// Load resistance, ohms.
    pub load_resistance: f64,
    /// Constant interval: T_on (buck) or T_off (boost), seconds.
    pub fixed_time: f64,
    /// Sampling fraction of the fixed interval, in (0, 1).
    pub lambda: f64,
    /// Actuator floor for the comparator-controlled interval, seconds.
    #[serde(default = "default_min_controlled_time")]
    pub min_controlled_time: f64,
    /// Series resistance in the inductor path, ohms; 0 = lossless.
    #[serde(default)]
    pub series_resistance: f64,
}

/// Two logic cycles of a 100 MHz-class controller.
pub const DEFAULT_MIN_CONTROLLED_TIME: f64 = 20e-9;

fn default_min_controlled_time() -> f64 {
    DEFAULT_MIN_CONTROLLED_TIME
}

impl CircuitParams {
    /// Validate all hard invariants. Returns the parameters unchanged so the
    /// call chains into constructors.
    pub fn validated(self) -> Result<Self> {
        let positive = [
            ("v_in", self.v_in),
            ("inductance", self.inductance),
            ("capacitance", self.capacitance),
            ("load_resistance", self.load_resistance),
            ("fixed_time", self.fixed_time),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie strictly inside (0, 1), got {}",
                self.lambda
            )));
        }
        if !(self.min_controlled_time.is_finite() && self.min_controlled_time >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "min_controlled_time must be >= 0, got {}",
                self.min_controlled_time
            )));
        }
        if !(self.series_resistance.is_finite() && self.series_resistance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "series_resistance must be >= 0, got {}",
                self.series_resistance
            )));
        }
        Ok(self)
    }

    /// RC time constant of the output filter, seconds.
    pub fn rc(&self) -> f64 {
        self.load_resistance * self.capacitance
    }

    /// True when the fixed interval is no longer small against the output
    /// filter time constant, which degrades the quadratic cycle model.
    pub fn quadratic_model_warning(&self) -> bool {
        self.fixed_time > 0.05 * self.rc()
    }
}

/// Physical state of the power stage at an absolute simulation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousState {
    /// Output capacitor voltage, volts.
    pub v: f64,
    /// Inductor current, amperes.
    pub i_l: f64,
    /// Absolute time, seconds.
    pub t: f64,
}

impl ContinuousState {
    pub fn new(v: f64, i_l: f64, t: f64) -> Self {
        ContinuousState { v, i_l, t }
    }

    /// CCM operation requires a positive output voltage.
    pub fn check_ccm(&self) -> Result<()> {
        if self.v <= 0.0 {
            Err(Error::CcmViolation {
                voltage: self.v,
                time: self.t,
            })
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn rejects_lambda_outside_open_interval() {
        for bad in [0.0, 1.0, 1.2, -0.1, f64::NAN] {
            let mut p = presets::table2_boost();
            p.lambda = bad;
            assert!(p.validated().is_err(), "lambda {bad} should be rejected");
        }
    }

    #[test]
    fn rejects_nonpositive_physical_values() {
        let mut p = presets::table1_buck();
        p.inductance = 0.0;
        assert!(p.validated().is_err());
    }

    #[test]
    fn quadratic_warning_tracks_fixed_time_against_rc() {
        let p = presets::table2_boost();
        // Table-style boost: 200 ns against RC = 100 us.
        assert!(!p.quadratic_model_warning());
        let mut slow = p;
        slow.capacitance = 30e-9; // RC = 3 us, fixed_time > 5 % of it
        assert!(slow.quadratic_model_warning());
    }

    #[test]
    fn ccm_check_flags_nonpositive_voltage() {
        assert!(ContinuousState::new(1.0, 0.0, 0.0).check_ccm().is_ok());
        assert!(ContinuousState::new(0.0, 0.0, 0.0).check_ccm().is_err());
        assert!(ContinuousState::new(-2.0, 0.0, 0.0).check_ccm().is_err());
    }
}
