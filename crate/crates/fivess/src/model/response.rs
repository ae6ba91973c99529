//! Discrete-model step response and model-versus-simulation error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::plant::PlantCoefficients;

/// Iterate the plant recursion from zero initial perturbation.
///
/// `commands[n]` is the current-command perturbation of cycle n; the result
/// has the same length, with `out[0] = 0`.
pub fn model_step_response(coeffs: &PlantCoefficients, commands: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; commands.len()];
    for n in 1..commands.len() {
        let i_prev2 = if n >= 2 { commands[n - 2] } else { 0.0 };
        out[n] = coeffs.gamma_v * out[n - 1]
            + coeffs.gamma_i * commands[n - 1]
            + coeffs.gamma_im1 * i_prev2;
    }
    out
}

/// Per-cycle and worst-case error between a model prediction and a
/// simulated voltage sequence, in percent of the step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelErrorReport {
    /// e[n] = (v_sim[n] - v_model[n]) / step_size * 100.
    pub e: Vec<f64>,
    /// max_n |e[n]|.
    pub e_w: f64,
}

/// Compare aligned voltage sequences. Lengths may differ; the overlap is
/// compared.
pub fn model_error(model: &[f64], sim: &[f64], step_size: f64) -> Result<ModelErrorReport> {
    if step_size == 0.0 || !step_size.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "step_size must be finite and nonzero, got {step_size}"
        )));
    }
    let n = model.len().min(sim.len());
    let e: Vec<f64> = (0..n)
        .map(|k| (sim[k] - model[k]) / step_size * 100.0)
        .collect();
    let e_w = e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(ModelErrorReport { e, e_w })
}
