//! Numerical linearization of the cycle map, independent of the closed-form
//! plants.
//!
//! The oracle perturbs the current command about an open-loop fixed point
//! with an impulse and a step, subtracts an unperturbed baseline run, and
//! fits the two-input recursion by least squares. It shares no code with the
//! closed-form coefficient formulas, so the two can check each other.

use crate::converter::{
    find_equilibrium, simulate, CircuitParams, CommandSource, CycleStart, SimOptions,
};
use crate::error::{Error, Result};
use crate::model::plant::{OperatingPoint, PlantCoefficients};

/// Relative command perturbation used when the caller has no preference.
pub const DEFAULT_ORACLE_DELTA_REL: f64 = 1e-4;

/// Fit `v[n+1] = gv v[n] + gi i[n] + gim1 i[n-1]` over all admissible rows.
/// Returns `(gv, gi, gim1, rms_residual)`.
pub fn fit_voltage_recursion(v: &[f64], i: &[f64], skip: usize) -> Result<(f64, f64, f64, f64)> {
    let n = v.len().min(i.len());
    if n < skip + 5 {
        return Err(Error::InvalidParameter(format!(
            "need at least {} cycles to fit the recursion, got {n}",
            skip + 5
        )));
    }
    // Normal equations for the 3-parameter least squares.
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    let mut rows = 0usize;
    for k in skip.max(1)..n - 1 {
        let row = [v[k], i[k], i[k - 1]];
        let y = v[k + 1];
        for a in 0..3 {
            for b in 0..3 {
                ata[a][b] += row[a] * row[b];
            }
            atb[a] += row[a] * y;
        }
        rows += 1;
    }
    let sol = solve3(ata, atb).ok_or_else(|| {
        Error::InvalidParameter("linearization fit is rank deficient; excite both inputs".into())
    })?;

    let mut ss_res = 0.0;
    for k in skip.max(1)..n - 1 {
        let pred = sol[0] * v[k] + sol[1] * i[k] + sol[2] * i[k - 1];
        ss_res += (v[k + 1] - pred) * (v[k + 1] - pred);
    }
    Ok((sol[0], sol[1], sol[2], (ss_res / rows as f64).sqrt()))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut s = b[col];
        for k in col + 1..3 {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

struct ProgrammedCommands<'a> {
    base: f64,
    perturbation: &'a [f64],
}

impl CommandSource for ProgrammedCommands<'_> {
    fn command(&mut self, ctx: &CycleStart<'_>) -> f64 {
        self.base + self.perturbation.get(ctx.n).copied().unwrap_or(0.0)
    }
}

/// Cycles fitted per excitation run.
const WINDOW: usize = 30;
/// Leading cycles excluded from the fit.
const SKIP: usize = 2;

fn excitation_run(
    params: &CircuitParams,
    base_cmd: f64,
    start: crate::converter::ContinuousState,
    pattern: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut src = ProgrammedCommands {
        base: base_cmd,
        perturbation: pattern,
    };
    let trace = simulate(
        params,
        start,
        &mut src,
        &SimOptions {
            max_cycles: WINDOW + 2,
            dense: false,
            ..SimOptions::default()
        },
    );
    (trace.sampled_voltages(), trace.current_extremes())
}

/// Derive the plant coefficients by perturbing the simulator about the
/// operating point's fixed point and fitting the recursion.
///
/// `delta` is the command perturbation in amperes; it must stay small
/// against the operating current for the fit to see the linear regime. The
/// fit residual is checked against 1e-3 of the response norm and rejected as
/// a nonlinearity error beyond that.
pub fn numerical_linearization_oracle(
    params: &CircuitParams,
    op: &OperatingPoint,
    delta: f64,
) -> Result<PlantCoefficients> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "perturbation delta must be positive, got {delta}"
        )));
    }
    let base_cmd = op.i_extreme;
    let eq = find_equilibrium(params, base_cmd, 40_000, 1e-14)?;

    // Unperturbed baseline to cancel any residual settling drift.
    let (v_base, i_base) = excitation_run(params, base_cmd, eq.boundary_state, &[]);

    // Impulse and step excitations, stacked into one fit. Both fire after
    // the discarded lead-in so their onsets land inside the fitted window;
    // the onset rows are what separates gamma_i from gamma_im1.
    let impulse = {
        let mut p = vec![0.0; WINDOW];
        p[SKIP] = delta;
        p
    };
    let step: Vec<f64> = (0..WINDOW + 2)
        .map(|n| if n >= SKIP { delta } else { 0.0 })
        .collect();
    let mut v_all: Vec<f64> = Vec::new();
    let mut i_all: Vec<f64> = Vec::new();
    for pattern in [impulse.as_slice(), step.as_slice()] {
        let (v_run, i_run) = excitation_run(params, base_cmd, eq.boundary_state, pattern);
        v_all.extend(v_run.iter().zip(&v_base).map(|(a, b)| a - b));
        i_all.extend(i_run.iter().zip(&i_base).map(|(a, b)| a - b));
    }

    // Combined fit over both runs: refit on the stacked rows, excluding the
    // artificial seam between runs.
    let seam = v_base.len();
    let (gv, gi, gim1, residual) = {
        let mut ata = [[0.0f64; 3]; 3];
        let mut atb = [0.0f64; 3];
        let mut rows = 0usize;
        let mut ss = 0.0;
        let admissible = |k: usize| {
            let in_first = k >= SKIP && k + 1 < seam;
            let in_second = k >= seam + SKIP && k + 1 < v_all.len();
            in_first || in_second
        };
        for k in 0..v_all.len().saturating_sub(1) {
            if !admissible(k) || k == 0 || k == seam {
                continue;
            }
            let row = [v_all[k], i_all[k], i_all[k - 1]];
            for a in 0..3 {
                for b in 0..3 {
                    ata[a][b] += row[a] * row[b];
                }
                atb[a] += row[a] * v_all[k + 1];
            }
            rows += 1;
        }
        let sol = solve3(ata, atb).ok_or_else(|| {
            Error::InvalidParameter("stacked linearization fit is rank deficient".into())
        })?;
        for k in 0..v_all.len().saturating_sub(1) {
            if !admissible(k) || k == 0 || k == seam {
                continue;
            }
            let pred = sol[0] * v_all[k] + sol[1] * i_all[k] + sol[2] * i_all[k - 1];
            ss += (v_all[k + 1] - pred) * (v_all[k + 1] - pred);
        }
        (sol[0], sol[1], sol[2], (ss / rows as f64).sqrt())
    };

    let v_norm = (v_all.iter().map(|x| x * x).sum::<f64>() / v_all.len() as f64).sqrt();
    let limit = 1e-3 * v_norm;
    if residual > limit {
        return Err(Error::Nonlinearity { residual, limit });
    }

    Ok(PlantCoefficients {
        a1: gv,
        b1: -gim1 / gi,
        g1: gi,
        gamma_v: gv,
        gamma_i: gi,
        gamma_im1: gim1,
        tau1_hat: None,
        tau2_hat: None,
        tau3_hat: None,
        m_r: None,
        lambda: params.lambda,
        singular_zero: gi.abs() < 1e-300,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::plant::{boost_plant, buck_plant};
    use crate::model::response::model_step_response;
    use crate::presets;
    use approx::assert_relative_eq;

    #[test]
    fn fit_recovers_synthetic_recursion_exactly() {
        // Feed the fitter data generated by the recursion itself.
        let p = PlantCoefficients::from_z_domain(0.93, -0.7, 1.5, 0.5);
        let mut cmds = vec![0.0; 40];
        cmds[0] = 1.0;
        for (k, c) in cmds.iter_mut().enumerate().skip(5) {
            *c = if k % 3 == 0 { 0.5 } else { -0.25 };
        }
        let v = model_step_response(&p, &cmds);
        let (gv, gi, gim1, res) = fit_voltage_recursion(&v, &cmds, 2).unwrap();
        assert_relative_eq!(gv, p.gamma_v, max_relative = 1e-10);
        assert_relative_eq!(gi, p.gamma_i, max_relative = 1e-10);
        assert_relative_eq!(gim1, p.gamma_im1, max_relative = 1e-10);
        assert!(res < 1e-12);
    }

    #[test]
    fn oracle_matches_buck_closed_form() {
        let p = presets::table1_buck();
        let op = OperatingPoint::from_simulation(&p, 1.8).unwrap();
        let closed = buck_plant(&p, &op).unwrap();
        let oracle =
            numerical_linearization_oracle(&p, &op, DEFAULT_ORACLE_DELTA_REL * op.i_extreme)
                .unwrap();
        assert_relative_eq!(oracle.gamma_v, closed.gamma_v, max_relative = 0.01);
        assert_relative_eq!(oracle.gamma_i, closed.gamma_i, max_relative = 0.02);
    }

    #[test]
    fn oracle_matches_boost_closed_form() {
        let p = presets::table2_boost();
        let op = OperatingPoint::from_simulation(&p, 40.0).unwrap();
        let closed = boost_plant(&p, &op).unwrap();
        let oracle =
            numerical_linearization_oracle(&p, &op, DEFAULT_ORACLE_DELTA_REL * op.i_extreme)
                .unwrap();
        assert_relative_eq!(oracle.a1, closed.a1, max_relative = 0.01);
        assert_relative_eq!(oracle.g1, closed.g1, max_relative = 0.02);
    }

    #[test]
    fn oracle_is_in_linear_regime() {
        // Halving delta moves the fitted coefficients by < 0.1 %.
        let p = presets::table2_boost();
        let op = OperatingPoint::from_simulation(&p, 40.0).unwrap();
        let d = DEFAULT_ORACLE_DELTA_REL * op.i_extreme;
        let full = numerical_linearization_oracle(&p, &op, d).unwrap();
        let half = numerical_linearization_oracle(&p, &op, d / 2.0).unwrap();
        assert_relative_eq!(full.gamma_v, half.gamma_v, max_relative = 1e-3);
        assert_relative_eq!(full.gamma_i, half.gamma_i, max_relative = 1e-3);
    }
}
