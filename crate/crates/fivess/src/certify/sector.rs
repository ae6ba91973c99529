//! Sector bounds on the current comparator's static mapping under
//! band-limited interference, and the sensor-monotonicity predicate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiplicative sector around the ideal command-to-peak mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorBound {
    /// Interference slope bound 4 pi f_ub A_ub, A/s.
    pub lambda_ub: f64,
    pub k_lb: f64,
    pub k_ub: f64,
}

/// Sector bounds from the interference bandwidth `f_ub` (Hz), amplitude
/// `A_ub` (A) and the loop constant `g0` (s/A): a signal band-limited to
/// f_ub with amplitude A_ub can slope no faster than `4 pi f_ub A_ub`, and
/// the static mapping then lies in the sector
/// `[1/(1 + lambda g0), 1/(1 - lambda g0)]`.
pub fn sector_bounds(f_ub: f64, a_ub: f64, g0: f64) -> Result<SectorBound> {
    for (name, v) in [("f_ub", f_ub), ("a_ub", a_ub), ("g0", g0)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be finite and >= 0, got {v}"
            )));
        }
    }
    let lambda_ub = 4.0 * std::f64::consts::PI * f_ub * a_ub;
    let product = lambda_ub * g0;
    if product >= 1.0 {
        return Err(Error::UnboundedSector(product));
    }
    Ok(SectorBound {
        lambda_ub,
        k_lb: 1.0 / (1.0 + product),
        k_ub: 1.0 / (1.0 - product),
    })
}

/// Monotonicity check on a sampled sensor waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub monotonic: bool,
    /// Index pair of the first violating interval.
    pub violation: Option<(usize, usize)>,
}

/// True iff the sampled values strictly increase. Strict monotonicity of
/// the sensed current ramp is what makes the command-to-on-time mapping
/// onto and continuous, so this is the practical actuation-health check.
pub fn sensor_monotonicity(samples: &[(f64, f64)]) -> Result<MonotonicityReport> {
    for w in samples.windows(2) {
        if w[1].0 < w[0].0 {
            return Err(Error::InvalidParameter(
                "samples must be sorted by time".into(),
            ));
        }
        if w[1].0 == w[0].0 {
            return Err(Error::InvalidParameter(format!(
                "duplicate timestamp {} in sensor samples",
                w[0].0
            )));
        }
    }
    for (idx, w) in samples.windows(2).enumerate() {
        if w[1].1 <= w[0].1 {
            return Ok(MonotonicityReport {
                monotonic: false,
                violation: Some((idx, idx + 1)),
            });
        }
    }
    Ok(MonotonicityReport {
        monotonic: true,
        violation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn no_interference_is_identity_sector() {
        let s = sector_bounds(1e6, 0.0, 2e-6).unwrap();
        assert_eq!(s.lambda_ub, 0.0);
        assert_eq!(s.k_lb, 1.0);
        assert_eq!(s.k_ub, 1.0);
    }

    #[test]
    fn hand_evaluated_fixture() {
        // f_ub = 1 MHz, A_ub = 10 mA, g0 = 2 us/A.
        let s = sector_bounds(1e6, 0.01, 2e-6).unwrap();
        assert_relative_eq!(s.lambda_ub, 1.256_637e5, max_relative = 1e-6);
        assert_relative_eq!(s.k_lb, 0.799_15, max_relative = 1e-4);
        assert_relative_eq!(s.k_ub, 1.335_70, max_relative = 1e-4);
    }

    #[test]
    fn bounds_straddle_unity() {
        let s = sector_bounds(2e6, 0.005, 1e-6).unwrap();
        assert!(s.k_lb < 1.0 && 1.0 < s.k_ub);
    }

    #[test]
    fn unbounded_sector_rejected() {
        assert!(matches!(
            sector_bounds(1e6, 0.1, 1e-6),
            Err(Error::UnboundedSector(_))
        ));
    }

    #[test]
    fn ramp_is_monotonic() {
        let m1 = 1e6;
        let samples: Vec<(f64, f64)> = (0..100).map(|k| {
            let t = k as f64 * 1e-9;
            (t, m1 * t)
        }).collect();
        assert!(sensor_monotonicity(&samples).unwrap().monotonic);
    }

    #[test]
    fn fast_sinusoid_violates_and_reports_interval() {
        // Ramp plus a sinusoid whose peak slope exceeds the ramp slope.
        let m1 = 1e6;
        let (a, w) = (0.05, 4e7); // a*w = 2e6 > m1
        let samples: Vec<(f64, f64)> = (0..400)
            .map(|k| {
                let t = k as f64 * 1e-9;
                (t, m1 * t + a * (w * t).sin())
            })
            .collect();
        let rep = sensor_monotonicity(&samples).unwrap();
        assert!(!rep.monotonic);
        let (i, j) = rep.violation.unwrap();
        assert_eq!(j, i + 1);
        assert!(samples[j].1 <= samples[i].1);
    }

    #[test]
    fn single_sample_is_vacuously_monotonic() {
        assert!(sensor_monotonicity(&[(0.0, 1.0)]).unwrap().monotonic);
    }

    #[test]
    fn duplicate_timestamps_rejected() {
        assert!(sensor_monotonicity(&[(0.0, 1.0), (0.0, 2.0)]).is_err());
    }
}
