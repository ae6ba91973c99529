//! Runnable stability and performance certificates: discrete pole checks,
//! step metrology, settling-time and overshoot bounds, large-signal
//! certificates, sector bounds and randomized verification suites.

mod gas;
mod metrics;
mod sector;
mod suite;

pub use gas::{
    boost_gas_case_selector, boost_gas_certificate, buck_gas_certificate, GasCase, GasCertificate,
};
pub use metrics::{
    measure_step_metrics, overshoot_bound, settling_time_bound, BoundCheck, StepMetrics,
    DEFAULT_SETTLE_BAND,
};
pub use sector::{sector_bounds, sensor_monotonicity, MonotonicityReport, SectorBound};
pub use suite::{
    boost_bound_suite, run_reference_step, stability_dichotomy, suite_controller,
    BoundSuiteReport, DichotomyReport, DichotomyRun, ScenarioCheck, STEP_RANGE,
};

use serde::{Deserialize, Serialize};

use crate::controller::{closed_loop_poles, S2PiController};
use crate::model::PlantCoefficients;

/// Default distance the dominant pole must keep from the unit circle.
pub const DEFAULT_STABILITY_MARGIN: f64 = 1e-9;

/// Pole radii of the compensated loop and the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    pub stable: bool,
    pub pole_radii: [f64; 3],
    pub margin: f64,
}

/// Discrete stability: all closed-loop poles strictly inside the unit
/// disk, with `margin` of guard band.
pub fn check_discrete_stability_with_margin(
    plant: &PlantCoefficients,
    ctrl: &S2PiController,
    margin: f64,
) -> StabilityCheck {
    let poles = closed_loop_poles(plant, ctrl);
    let mut pole_radii = [0.0; 3];
    for (r, z) in pole_radii.iter_mut().zip(poles.iter()) {
        *r = z.norm();
    }
    let max = pole_radii.iter().fold(0.0f64, |m, r| m.max(*r));
    StabilityCheck {
        stable: max < 1.0 - margin,
        pole_radii,
        margin,
    }
}

/// [`check_discrete_stability_with_margin`] at the default margin.
pub fn check_discrete_stability(
    plant: &PlantCoefficients,
    ctrl: &S2PiController,
) -> StabilityCheck {
    check_discrete_stability_with_margin(plant, ctrl, DEFAULT_STABILITY_MARGIN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn open_integrator_is_not_stable() {
        // k = 0 leaves the compensator pole exactly on the unit circle.
        let plant = presets::buck_example_plant();
        let ctrl = S2PiController::new(0.0, 0.9, 1.0);
        let check = check_discrete_stability(&plant, &ctrl);
        assert!(!check.stable);
    }

    #[test]
    fn buck_fixture_design_is_stable() {
        let plant = presets::buck_example_plant();
        let ctrl = S2PiController::new(62.0, 0.975, 1.0);
        assert!(check_discrete_stability(&plant, &ctrl).stable);
    }
}
