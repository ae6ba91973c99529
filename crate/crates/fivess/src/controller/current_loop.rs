//! Current-loop design equations for the four converter families, under a
//! bounded-slope interference on the current sensor.

use crate::error::{Error, Result};

/// Converter family of the inner current loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurrentLoopKind {
    ConstantOffTime,
    ConstantOnTime,
    FixedFrequencyPeak,
    FixedFrequencyValley,
}

/// Evaluated design row: stability criterion, worst-case pole interval
/// [a_min, a_max], zero b, and the derived settling/overshoot metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentLoopDesign {
    pub kind: CurrentLoopKind,
    pub stable: bool,
    pub a_min: f64,
    pub a_max: f64,
    pub b: f64,
    /// Worst-case settling cycles.
    pub n_w: f64,
    /// Worst-case overshoot fraction.
    pub o_w: f64,
}

/// Worst-case settling cycles `max{|4/ln|a_min||, |4/ln|a_max||}`.
///
/// A coefficient of zero settles in a single cycle (deadbeat) and reports 1;
/// |a| >= 1 reports infinity.
pub fn settling_cycles_nw(a_min: f64, a_max: f64) -> f64 {
    fn one(a: f64) -> f64 {
        let m = a.abs();
        if m >= 1.0 {
            f64::INFINITY
        } else if m == 0.0 {
            1.0
        } else {
            (4.0 / m.ln()).abs()
        }
    }
    one(a_min).max(one(a_max))
}

/// Worst-case overshoot `max{(b - a_min)/(1 - b), 0}` for a one-pole
/// one-zero loop. Requires `b < 1`.
pub fn worst_overshoot_ow(a_min: f64, b: f64) -> Result<f64> {
    if b >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "overshoot formula needs b < 1, got {b}"
        )));
    }
    Ok(((b - a_min) / (1.0 - b)).max(0.0))
}

/// Evaluate one design-table row for rising/falling current slopes `m1`,
/// `m2` (A/s) and interference slope bound `lambda_ub` (A/s).
///
/// When the stability criterion fails the row is still evaluated wherever
/// the formulas are defined, with `stable = false`.
pub fn current_loop_design(
    kind: CurrentLoopKind,
    m1: f64,
    m2: f64,
    lambda_ub: f64,
) -> Result<CurrentLoopDesign> {
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "current slopes must be positive, got m1={m1}, m2={m2}"
        )));
    }
    if lambda_ub < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "interference bound must be >= 0, got {lambda_ub}"
        )));
    }
    let lam = lambda_ub;
    let (stable, a_min, a_max, b) = match kind {
        CurrentLoopKind::ConstantOffTime => (
            lam <= m1 / 2.0,
            1.0 - m1 / (m1 - lam),
            1.0 - m1 / (m1 + lam),
            0.0,
        ),
        CurrentLoopKind::ConstantOnTime => (
            lam <= m2 / 2.0,
            1.0 - m2 / (m2 - lam),
            1.0 - m2 / (m2 + lam),
            0.0,
        ),
        CurrentLoopKind::FixedFrequencyPeak => (
            lam <= (m1 - m2) / 2.0,
            (-lam - m2) / (m1 - lam),
            (lam - m2) / (m1 + lam),
            -m2 / m1,
        ),
        CurrentLoopKind::FixedFrequencyValley => (
            lam <= (m2 - m1) / 2.0,
            (-lam - m1) / (m2 - lam),
            (lam - m1) / (m2 + lam),
            -m1 / m2,
        ),
    };
    Ok(CurrentLoopDesign {
        kind,
        stable,
        a_min,
        a_max,
        b,
        n_w: settling_cycles_nw(a_min, a_max),
        o_w: worst_overshoot_ow(a_min, b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn settling_cycles_hand_values() {
        let e = std::f64::consts::E;
        assert_relative_eq!(settling_cycles_nw(1.0 / e, 1.0 / e), 4.0);
        assert_relative_eq!(settling_cycles_nw(1.0 / (e * e), 1.0 / e), 4.0);
        assert!(settling_cycles_nw(1.0, 0.5).is_infinite());
        // a -> 0+ tends to zero cycles; exactly zero is the one-cycle
        // deadbeat.
        assert!(settling_cycles_nw(1e-9, 1e-9) < 0.2);
        assert_eq!(settling_cycles_nw(0.0, 0.0), 1.0);
    }

    #[test]
    fn overshoot_hand_values() {
        assert_relative_eq!(worst_overshoot_ow(-0.5, 0.0).unwrap(), 0.5);
        assert_eq!(worst_overshoot_ow(0.3, 0.2).unwrap(), 0.0);
        assert!(worst_overshoot_ow(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_interference_is_deadbeat() {
        let d = current_loop_design(CurrentLoopKind::ConstantOffTime, 1e6, 5e5, 0.0).unwrap();
        assert!(d.stable);
        assert_eq!(d.a_min, 0.0);
        assert_eq!(d.a_max, 0.0);
        assert_eq!(d.b, 0.0);
        assert_eq!(d.n_w, 1.0);
        assert_eq!(d.o_w, 0.0);
    }

    #[test]
    fn criterion_boundary_constant_off_time() {
        // lambda_ub = m1/2: a_min = -1, a_max = 1/3.
        let m1 = 2e6;
        let d = current_loop_design(CurrentLoopKind::ConstantOffTime, m1, 1e6, m1 / 2.0).unwrap();
        assert!(d.stable);
        assert_relative_eq!(d.a_min, -1.0);
        assert_relative_eq!(d.a_max, 1.0 / 3.0);
        assert!(d.n_w.is_infinite());
    }

    #[test]
    fn fixed_frequency_peak_degenerates_to_constant_off_time() {
        // m2 = 0 is outside the precondition, so compare in the limit.
        let m1 = 3e6;
        let lam = 1e5;
        let peak =
            current_loop_design(CurrentLoopKind::FixedFrequencyPeak, m1, 1e-6, lam).unwrap();
        let cot = current_loop_design(CurrentLoopKind::ConstantOffTime, m1, 1.0, lam).unwrap();
        assert_relative_eq!(peak.a_min, cot.a_min, epsilon = 1e-9);
        assert_relative_eq!(peak.a_max, cot.a_max, epsilon = 1e-9);
        assert_relative_eq!(peak.b, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn valley_row_is_peak_row_with_slopes_swapped() {
        let (m1, m2, lam) = (4e6, 1.5e6, 3e5);
        let valley =
            current_loop_design(CurrentLoopKind::FixedFrequencyValley, m2, m1, lam).unwrap();
        let peak = current_loop_design(CurrentLoopKind::FixedFrequencyPeak, m1, m2, lam).unwrap();
        assert_eq!(valley.stable, peak.stable);
        assert_eq!(valley.a_min, peak.a_min);
        assert_eq!(valley.a_max, peak.a_max);
        assert_eq!(valley.b, peak.b);
    }

    #[test]
    fn unstable_rows_still_report_metrics() {
        let d = current_loop_design(CurrentLoopKind::ConstantOnTime, 1e6, 1e6, 0.9e6).unwrap();
        assert!(!d.stable);
        assert!(d.a_min.is_finite());
    }
}
