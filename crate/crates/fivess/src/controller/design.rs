//! Closed-loop pole computation and the constrained compensator search.

use num_complex::Complex64;

use crate::controller::S2PiController;
use crate::error::{Error, Result};
use crate::model::PlantCoefficients;

/// Gain search grid, expressed relative to `1/|g1|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainGrid {
    pub min_scale: f64,
    pub max_scale: f64,
    pub points: usize,
}

impl Default for GainGrid {
    fn default() -> Self {
        GainGrid {
            min_scale: 1e-2,
            max_scale: 1e4,
            points: 200,
        }
    }
}

/// Constraints and search controls for [`design_s2pi`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSpec {
    /// Largest admissible discrete-model step overshoot, as a fraction of
    /// the final value. Use `f64::INFINITY` to disable.
    pub max_overshoot: f64,
    /// Optional ceiling on the measured settling cycles of the discrete
    /// step response.
    pub target_settling_cycles: Option<u32>,
    /// Optional absolute gain ceiling, amperes per volt. Caps the
    /// proportional kick so large reference steps stay within the command
    /// range instead of slamming the actuator between its limits.
    pub max_gain: Option<f64>,
    pub gain_grid: GainGrid,
    /// Number of zero candidates over `[a1 - 0.1, a1 + 0.9 (1 - a1))`.
    /// The range reaches above the plant pole because cancelling it from
    /// between the pole and the integrator is what produces monotone
    /// responses; zeros below the pole force a complex closed-loop pair.
    pub zero_points: usize,
}

impl Default for DesignSpec {
    fn default() -> Self {
        DesignSpec {
            max_overshoot: 0.05,
            target_settling_cycles: None,
            max_gain: None,
            gain_grid: GainGrid::default(),
            zero_points: 50,
        }
    }
}

/// Roots of the closed-loop characteristic polynomial
/// `(1 - a1 z^-1)(1 - p_k z^-1) + k g1 (1 - b1 z^-1)(1 - z_k z^-1) z^-1`,
/// a cubic in z, solved in closed form and polished with Newton steps.
pub fn closed_loop_poles(plant: &PlantCoefficients, ctrl: &S2PiController) -> [Complex64; 3] {
    let kg = ctrl.gain * plant.g1;
    let c2 = kg - plant.a1 - ctrl.pole;
    let c1 = plant.a1 * ctrl.pole - kg * (plant.b1 + ctrl.zero);
    let c0 = kg * plant.b1 * ctrl.zero;
    let mut roots = cubic_roots(c2, c1, c0);
    // Newton polish against the monic cubic.
    for z in &mut roots {
        for _ in 0..2 {
            let f = ((*z + c2) * *z + c1) * *z + c0;
            let df = (3.0 * *z + 2.0 * c2) * *z + c1;
            if df.norm() > 0.0 {
                *z -= f / df;
            }
        }
    }
    roots
}

/// Roots of `z^3 + c2 z^2 + c1 z + c0` by Cardano's formula.
fn cubic_roots(c2: f64, c1: f64, c0: f64) -> [Complex64; 3] {
    // Depressed cubic t^3 + p t + q with z = t - c2/3.
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2.powi(3) / 27.0 - c2 * c1 / 3.0 + c0;
    let half_q = Complex64::new(q / 2.0, 0.0);
    let disc = (half_q * half_q + Complex64::new(p / 3.0, 0.0).powu(3)).sqrt();
    // Pick the branch keeping |u| away from zero.
    let u3 = if (-half_q + disc).norm() >= (-half_q - disc).norm() {
        -half_q + disc
    } else {
        -half_q - disc
    };
    let u = u3.powf(1.0 / 3.0);
    let omega = Complex64::new(-0.5, 3.0f64.sqrt() / 2.0);
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (i, w) in [Complex64::new(1.0, 0.0), omega, omega * omega]
        .into_iter()
        .enumerate()
    {
        let uk = u * w;
        let t = if uk.norm() > 1e-30 {
            uk - Complex64::new(p / 3.0, 0.0) / uk
        } else {
            Complex64::new(0.0, 0.0)
        };
        out[i] = t - shift;
    }
    out
}

/// Largest pole magnitude.
pub fn dominant_radius(poles: &[Complex64; 3]) -> f64 {
    poles.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Closed-loop discrete step response of the plant/controller pair for a
/// unit reference step, from rest. The compensator runs without limits.
pub fn discrete_step_response(
    plant: &PlantCoefficients,
    ctrl: &S2PiController,
    cycles: usize,
) -> Vec<f64> {
    let mut c = *ctrl;
    c.command_min = f64::NEG_INFINITY;
    c.command_max = f64::INFINITY;
    c.reseed(0.0, 0.0);
    let mut v = vec![0.0; cycles];
    let mut u_prev = 0.0;
    let mut u_prev2 = 0.0;
    for n in 0..cycles {
        if n >= 1 {
            v[n] = plant.gamma_v * v[n - 1] + plant.gamma_i * u_prev + plant.gamma_im1 * u_prev2;
        }
        let u = c.step(1.0 - v[n]);
        u_prev2 = u_prev;
        u_prev = u;
    }
    v
}

/// Asymptotic closed-loop value of a unit reference step.
fn step_final_value(plant: &PlantCoefficients, ctrl: &S2PiController) -> f64 {
    if ctrl.pole == 1.0 {
        return 1.0; // integrator forces zero steady-state error
    }
    let k1 = ctrl.gain * (1.0 - ctrl.zero) / (1.0 - ctrl.pole);
    let g1 = plant.dc_gain();
    k1 * g1 / (1.0 + k1 * g1)
}

/// Overshoot and settling cycles (2 % band) of the discrete closed-loop
/// step response.
fn discrete_step_quality(
    plant: &PlantCoefficients,
    ctrl: &S2PiController,
    radius: f64,
) -> (f64, usize) {
    let horizon = if radius < 1.0 {
        ((12.0 / -radius.ln()).ceil() as usize).clamp(200, 5000)
    } else {
        400
    };
    let v = discrete_step_response(plant, ctrl, horizon);
    let final_value = step_final_value(plant, ctrl);
    let peak = v.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
    let overshoot = ((peak - final_value) / final_value.abs()).max(0.0);
    let band = 0.02 * final_value.abs();
    let mut settle = v.len();
    for n in (0..v.len()).rev() {
        if (v[n] - final_value).abs() <= band {
            settle = n;
        } else {
            break;
        }
    }
    // A response that never holds the band within the horizon reports the
    // horizon itself, which deprioritizes it without excluding it.
    (overshoot, settle)
}

/// Grid search for the compensator: integrator pole fixed at 1, zero swept
/// over `[a1 - 0.1, a1 + 0.9 (1 - a1))`, gain over a log grid scaled by
/// `1/|g1|`. Among the stable candidates whose discrete step overshoot
/// stays within the spec, returns the one settling in the fewest cycles;
/// ties break toward smaller gain, then larger zero.
///
/// Settling is measured on the discrete closed loop rather than read off
/// the dominant pole radius: the best designs cancel the slow plant pole
/// almost exactly, leaving a large-radius pole of negligible residue that
/// says nothing about the actual response speed.
pub fn design_s2pi(plant: &PlantCoefficients, spec: &DesignSpec) -> Result<S2PiController> {
    if plant.a1.abs() >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "open-loop pole {} is not inside the unit disk",
            plant.a1
        )));
    }
    let g = &spec.gain_grid;
    if g.points < 2 || spec.zero_points < 1 || g.min_scale <= 0.0 || g.max_scale <= g.min_scale {
        return Err(Error::InvalidParameter("degenerate design grid".into()));
    }
    let base = 1.0 / plant.g1.abs();
    let mut log_lo = (g.min_scale * base).ln();
    let mut log_hi = (g.max_scale * base).ln();
    if let Some(cap) = spec.max_gain {
        if !(cap > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gain cap must be > 0, got {cap}"
            )));
        }
        // Keep the grid under the cap, preserving three decades of sweep.
        log_hi = log_hi.min(cap.ln());
        log_lo = log_lo.min(log_hi - 3.0 * 10f64.ln());
    }

    struct Candidate {
        settle: usize,
        radius: f64,
        gain: f64,
        zero: f64,
    }
    let mut best: Option<Candidate> = None;
    let mut best_any: Option<Candidate> = None;

    let zero_lo = plant.a1 - 0.1;
    let zero_hi = plant.a1 + 0.9 * (1.0 - plant.a1);
    for zi in 0..spec.zero_points {
        let zero = zero_lo + (zero_hi - zero_lo) * zi as f64 / spec.zero_points as f64;
        for ki in 0..g.points {
            let gain =
                (log_lo + (log_hi - log_lo) * ki as f64 / (g.points - 1) as f64).exp();
            let ctrl = S2PiController::new(gain, zero, 1.0);
            let poles = closed_loop_poles(plant, &ctrl);
            let radius = dominant_radius(&poles);
            if !radius.is_finite() {
                continue;
            }
            if best_any.as_ref().map_or(true, |b| radius < b.radius) {
                best_any = Some(Candidate {
                    settle: usize::MAX,
                    radius,
                    gain,
                    zero,
                });
            }
            if radius >= 1.0 {
                continue;
            }
            let (overshoot, settle) = discrete_step_quality(plant, &ctrl, radius);
            if overshoot > spec.max_overshoot + 1e-6 {
                continue;
            }
            if let Some(target) = spec.target_settling_cycles {
                if settle > target as usize {
                    continue;
                }
            }
            let better = match &best {
                None => true,
                Some(b) => {
                    settle < b.settle
                        || (settle == b.settle
                            && (gain < b.gain || (gain == b.gain && zero > b.zero)))
                }
            };
            if better {
                best = Some(Candidate {
                    settle,
                    radius,
                    gain,
                    zero,
                });
            }
        }
    }

    match best {
        Some(c) => Ok(S2PiController::new(c.gain, c.zero, 1.0)),
        None => {
            let (bg, bz, br) = best_any
                .map(|b| (b.gain, b.zero, b.radius))
                .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
            Err(Error::InfeasibleDesign {
                reason: format!(
                    "no grid point met overshoot <= {} and the settling target",
                    spec.max_overshoot
                ),
                best_gain: bg,
                best_zero: bz,
                best_radius: br,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OperatingPoint;
    use crate::presets;
    use approx::assert_relative_eq;

    #[test]
    fn open_loop_poles_at_zero_gain() {
        let plant = presets::buck_example_plant();
        let ctrl = S2PiController::new(0.0, 0.9, 1.0);
        let poles = closed_loop_poles(&plant, &ctrl);
        let mut mags: Vec<f64> = poles.iter().map(|z| z.norm()).collect();
        mags.sort_by(f64::total_cmp);
        assert_relative_eq!(mags[0], 0.0, epsilon = 1e-9);
        assert_relative_eq!(mags[1], plant.a1, max_relative = 1e-9);
        assert_relative_eq!(mags[2], 1.0, max_relative = 1e-9);
    }

    #[test]
    fn roots_satisfy_polynomial() {
        let plant = presets::buck_example_plant();
        let ctrl = S2PiController::new(62.0, 0.975, 1.0);
        let kg = ctrl.gain * plant.g1;
        let c2 = kg - plant.a1 - ctrl.pole;
        let c1 = plant.a1 * ctrl.pole - kg * (plant.b1 + ctrl.zero);
        let c0 = kg * plant.b1 * ctrl.zero;
        let scale = 1.0 + c2.abs() + c1.abs() + c0.abs();
        for z in closed_loop_poles(&plant, &ctrl) {
            let f = ((z + c2) * z + c1) * z + c0;
            assert!(f.norm() < 1e-10 * scale, "residual {} at {}", f.norm(), z);
        }
    }

    #[test]
    fn buck_fixture_design_is_stable_with_complex_pair() {
        // Reference buck plant with pole 1, zero 0.9750, gain 62: all poles
        // strictly inside the unit disk, two of them a conjugate pair.
        let plant = presets::buck_example_plant();
        let ctrl = S2PiController::new(62.0, 0.975, 1.0);
        let poles = closed_loop_poles(&plant, &ctrl);
        assert!(dominant_radius(&poles) < 1.0);
        let complex_count = poles.iter().filter(|z| z.im.abs() > 1e-9).count();
        assert_eq!(complex_count, 2);
    }

    #[test]
    fn design_search_returns_grid_optimum_when_unconstrained() {
        // With overshoot unconstrained the search must return the exhaustive
        // grid minimizer of the measured settling cycles (ties: smaller
        // gain, then larger zero).
        let p = presets::table2_boost();
        let op = OperatingPoint::ideal(&p, 40.0).unwrap();
        let plant = crate::model::boost_plant(&p, &op).unwrap();
        let spec = DesignSpec {
            max_overshoot: f64::INFINITY,
            gain_grid: GainGrid {
                points: 40,
                ..GainGrid::default()
            },
            zero_points: 10,
            ..DesignSpec::default()
        };
        let ctrl = design_s2pi(&plant, &spec).unwrap();

        // Exhaustive re-enumeration with the same quality measure.
        let base = 1.0 / plant.g1.abs();
        let (lo, hi) = ((1e-2f64 * base).ln(), (1e4f64 * base).ln());
        let (zlo, zhi) = (plant.a1 - 0.1, plant.a1 + 0.9 * (1.0 - plant.a1));
        let mut best: Option<(usize, f64, f64)> = None;
        for zi in 0..10 {
            let zero = zlo + (zhi - zlo) * zi as f64 / 10.0;
            for ki in 0..40 {
                let gain = (lo + (hi - lo) * ki as f64 / 39.0).exp();
                let cand = S2PiController::new(gain, zero, 1.0);
                let r = dominant_radius(&closed_loop_poles(&plant, &cand));
                if !(r < 1.0) {
                    continue;
                }
                let (_, settle) = super::discrete_step_quality(&plant, &cand, r);
                let better = match best {
                    None => true,
                    Some((bs, bg, bz)) => {
                        settle < bs
                            || (settle == bs && (gain < bg || (gain == bg && zero > bz)))
                    }
                };
                if better {
                    best = Some((settle, gain, zero));
                }
            }
        }
        let (_, bg, bz) = best.unwrap();
        assert_relative_eq!(ctrl.gain, bg, max_relative = 1e-12);
        assert_relative_eq!(ctrl.zero, bz, max_relative = 1e-12);
    }

    #[test]
    fn zero_overshoot_design_is_monotone() {
        let plant = presets::buck_example_plant();
        let spec = DesignSpec {
            max_overshoot: 0.0,
            gain_grid: GainGrid {
                points: 60,
                ..GainGrid::default()
            },
            zero_points: 15,
            ..DesignSpec::default()
        };
        let ctrl = design_s2pi(&plant, &spec).unwrap();
        let v = discrete_step_response(&plant, &ctrl, 400);
        let mut peak: f64 = 0.0;
        for x in &v {
            peak = peak.max(*x);
        }
        assert!(peak <= 1.0 + 1e-6, "peak {peak} exceeds final value");
    }

    #[test]
    fn boost_design_beats_open_loop_response() {
        // The designed loop settles far faster than the open-loop pole
        // (4/|ln a1| cycles) would.
        let p = presets::table2_boost();
        let op = OperatingPoint::ideal(&p, 40.0).unwrap();
        let plant = crate::model::boost_plant(&p, &op).unwrap();
        let ctrl = design_s2pi(&plant, &DesignSpec::default()).unwrap();
        let r = dominant_radius(&closed_loop_poles(&plant, &ctrl));
        assert!(r < 1.0);
        let (_, settle) = super::discrete_step_quality(&plant, &ctrl, r);
        let open_loop_cycles = 4.0 / -plant.a1.abs().ln();
        assert!(
            (settle as f64) < 0.25 * open_loop_cycles,
            "designed settle {settle} vs open-loop scale {open_loop_cycles:.0}"
        );
    }

    #[test]
    fn designed_controllers_are_always_stable() {
        let p = presets::table2_boost();
        for v in [25.0, 30.0, 35.0, 40.0] {
            let op = OperatingPoint::ideal(&p, v).unwrap();
            let plant = crate::model::boost_plant(&p, &op).unwrap();
            let ctrl = design_s2pi(&plant, &DesignSpec::default()).unwrap();
            let r = dominant_radius(&closed_loop_poles(&plant, &ctrl));
            assert!(r < 1.0);
        }
    }

    #[test]
    fn pole_continuity_in_gain() {
        // Poles move continuously with k on a fine grid.
        let plant = presets::buck_example_plant();
        let mut prev: Option<Vec<Complex64>> = None;
        let step = 0.05;
        let mut k = 1.0;
        while k < 100.0 {
            let mut poles = closed_loop_poles(&plant, &S2PiController::new(k, 0.975, 1.0)).to_vec();
            poles.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            if let Some(p) = prev {
                // Greedy match: each pole moves by less than 10x the k step.
                for z in &poles {
                    let d = p.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min);
                    assert!(d < 10.0 * step, "pole jump {d} at k={k}");
                }
            }
            prev = Some(poles);
            k += step;
        }
    }
}
