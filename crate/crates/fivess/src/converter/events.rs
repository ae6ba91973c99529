//! Comparator-event solvers for the controlled switch interval.

use crate::converter::params::{CircuitParams, ContinuousState, SwitchPhase};
use crate::converter::phase::{phase_model, propagate_exact};
use crate::error::{Error, Result};

/// Outcome of solving one controlled interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventSolution {
    /// Interval duration, floored at `min_controlled_time`.
    pub duration: f64,
    /// True when the actuator floor determined the duration.
    pub clamped: bool,
}

/// Default absolute tolerance for the buck valley-event root, seconds.
pub const DEFAULT_TIME_TOL: f64 = 1e-15;

/// On-time that ramps the boost inductor current from `x.i_l` up to
/// `i_cmd`.
///
/// During the on-phase the current is an exact ramp of slope `V_in/L`, so
/// the crossing time is `(i_cmd - i_l) L / V_in`, floored at the actuator
/// minimum.
pub fn solve_boost_on_time(
    x: &ContinuousState,
    i_cmd: f64,
    params: &CircuitParams,
) -> Result<EventSolution> {
    if !i_cmd.is_finite() {
        return Err(Error::NonFinite(format!("current command {i_cmd}")));
    }
    let rs = params.series_resistance;
    let exact = if rs == 0.0 {
        (i_cmd - x.i_l) * params.inductance / params.v_in
    } else {
        // di/dt = (V_in - rs i)/L: exponential approach toward V_in/rs.
        let ceiling = params.v_in / rs;
        if i_cmd >= ceiling {
            return Err(Error::InvalidParameter(format!(
                "command {i_cmd} A unreachable under series resistance (ceiling {ceiling} A)"
            )));
        }
        -(params.inductance / rs) * ((ceiling - i_cmd) / (ceiling - x.i_l)).ln()
    };
    if exact.is_nan() || exact <= params.min_controlled_time {
        Ok(EventSolution {
            duration: params.min_controlled_time,
            clamped: true,
        })
    } else {
        Ok(EventSolution {
            duration: exact,
            clamped: false,
        })
    }
}

/// Off-time that lets the buck inductor current fall from `x.i_l` to the
/// valley command along the exact off-phase flow.
///
/// The current is strictly decreasing while the output voltage stays
/// positive (`di/dt = -v/L < 0`), so the crossing is unique. The root is
/// bracketed, bisected down to ten times `time_tol` and polished with Newton
/// steps on the exact flow.
pub fn solve_buck_off_time(
    x: &ContinuousState,
    i_valley_cmd: f64,
    params: &CircuitParams,
    time_tol: f64,
) -> Result<EventSolution> {
    if !i_valley_cmd.is_finite() {
        return Err(Error::NonFinite(format!("current command {i_valley_cmd}")));
    }
    x.check_ccm()?;
    let delta = x.i_l - i_valley_cmd;
    if delta <= 0.0 {
        return Ok(EventSolution {
            duration: params.min_controlled_time,
            clamped: true,
        });
    }

    let pm = phase_model(params, SwitchPhase::Off);
    let current_at = |t: f64| -> Result<(f64, f64)> {
        let s = propagate_exact(x, &pm, t);
        s.check_ccm()?;
        // d(i_l)/dt = -v/L along the off phase.
        Ok((s.i_l, -s.v / params.inductance))
    };

    // Bracket: the fall is at least as fast as the frozen slope at the
    // smallest voltage seen, so 3 L di / v easily covers the root; double if
    // the voltage sagged more than that.
    let mut hi = 3.0 * params.inductance * delta / x.v;
    let mut lo = 0.0f64;
    let mut tries = 0;
    while current_at(hi)?.0 > i_valley_cmd {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::InvalidParameter(
                "buck off-time bracket failed to close".into(),
            ));
        }
    }

    // Bisect to 10 * time_tol.
    while hi - lo > 10.0 * time_tol {
        let mid = 0.5 * (lo + hi);
        if current_at(mid)?.0 > i_valley_cmd {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Newton polish on the strictly monotone residual.
    let mut t = 0.5 * (lo + hi);
    for _ in 0..4 {
        let (i, didt) = current_at(t)?;
        let step = (i - i_valley_cmd) / didt;
        let next = (t - step).clamp(lo, hi);
        if (next - t).abs() <= time_tol {
            t = next;
            break;
        }
        t = next;
    }

    if t <= params.min_controlled_time {
        Ok(EventSolution {
            duration: params.min_controlled_time,
            clamped: true,
        })
    } else {
        Ok(EventSolution {
            duration: t,
            clamped: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    #[test]
    fn boost_on_time_zero_ramp_clamps_to_floor() {
        let p = presets::table2_boost();
        let x = ContinuousState::new(40.0, 1.5, 0.0);
        let sol = solve_boost_on_time(&x, 1.5, &p).unwrap();
        assert!(sol.clamped);
        assert_eq!(sol.duration, p.min_controlled_time);
    }

    #[test]
    fn boost_on_time_linear_ramp() {
        // 1 A across 6.8 uH at 12 V: 566.7 ns.
        let p = presets::table2_boost();
        let x = ContinuousState::new(40.0, 1.0, 0.0);
        let sol = solve_boost_on_time(&x, 2.0, &p).unwrap();
        assert!(!sol.clamped);
        assert_relative_eq!(sol.duration, 566.666_666e-9, max_relative = 1e-6);
    }

    #[test]
    fn boost_on_time_rejects_non_finite_command() {
        let p = presets::table2_boost();
        let x = ContinuousState::new(40.0, 1.0, 0.0);
        assert!(solve_boost_on_time(&x, f64::NAN, &p).is_err());
    }

    #[test]
    fn buck_off_time_matches_frozen_slope_estimate() {
        // 0.9 A fall at roughly 1.8 V across 200 nH: ~100 ns; the refined
        // root stays within 1 % of the frozen-voltage estimate.
        let p = presets::table1_buck();
        let i_peak = 12.67;
        let x = ContinuousState::new(1.8, i_peak, 0.0);
        let cmd = i_peak - 0.9;
        let sol = solve_buck_off_time(&x, cmd, &p, DEFAULT_TIME_TOL).unwrap();
        let frozen = 0.9 * p.inductance / 1.8;
        assert!(!sol.clamped);
        assert_relative_eq!(sol.duration, frozen, max_relative = 0.01);
    }

    #[test]
    fn buck_off_time_event_exactness() {
        let p = presets::table1_buck();
        let x = ContinuousState::new(1.8, 12.0, 0.0);
        let cmd = 10.5;
        let tol = 1e-15;
        let sol = solve_buck_off_time(&x, cmd, &p, tol).unwrap();
        let pm = phase_model(&p, SwitchPhase::Off);
        let end = propagate_exact(&x, &pm, sol.duration);
        // |i(t*) - cmd| <= (v_max / L) * tol
        assert!((end.i_l - cmd).abs() <= 1.8 * 1.1 / p.inductance * tol * 10.0);
    }

    #[test]
    fn buck_off_time_successive_tolerances_agree() {
        let p = presets::table1_buck();
        let x = ContinuousState::new(1.8, 12.0, 0.0);
        let a = solve_buck_off_time(&x, 11.0, &p, 1e-12).unwrap();
        let b = solve_buck_off_time(&x, 11.0, &p, 1e-13).unwrap();
        assert!((a.duration - b.duration).abs() < 1e-12);
    }

    #[test]
    fn buck_off_time_clamps_when_command_above_current() {
        let p = presets::table1_buck();
        let x = ContinuousState::new(1.8, 10.0, 0.0);
        let sol = solve_buck_off_time(&x, 10.5, &p, DEFAULT_TIME_TOL).unwrap();
        assert!(sol.clamped);
        assert_eq!(sol.duration, p.min_controlled_time);
    }

    #[test]
    fn buck_off_time_raises_ccm_violation() {
        let p = presets::table1_buck();
        let x = ContinuousState::new(-0.1, 10.0, 0.0);
        assert!(matches!(
            solve_buck_off_time(&x, 9.0, &p, DEFAULT_TIME_TOL),
            Err(Error::CcmViolation { .. })
        ));
    }
}
