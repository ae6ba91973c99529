//! Step-transition metrology on simulator traces.

use serde::{Deserialize, Serialize};

use crate::converter::{CircuitParams, Topology, Trace};
use crate::error::{Error, Result};

/// Default settling band as a fraction of the step magnitude.
pub const DEFAULT_SETTLE_BAND: f64 = 0.02;

/// Cycles the voltage must stay in band at the end of the trace before the
/// run counts as settled; guards "permanently" against a single coincidental
/// in-band tail sample.
const MIN_SETTLED_TAIL: usize = 10;

/// Measured step-transition metrics.
///
/// Overshoots follow the sampled-sequence definitions: the discrete voltage
/// and current overshoots compare the worst sample against the final
/// equilibrium, normalized by the step size. The continuous overshoot is
/// measured on the dense trace beyond the settled waveform's own periodic
/// peak, so standing switching ripple does not register as overshoot, and is
/// floored at the discrete value (samples are a subset of the waveform).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// 10 % to 90 % rise time on the dense trace, seconds.
    pub rise_time_10_90: Option<f64>,
    /// Continuous voltage overshoot fraction.
    pub sigma_t_v: f64,
    /// Discrete (sampled) voltage overshoot fraction.
    pub sigma_d_v: f64,
    /// Discrete current-extreme overshoot fraction.
    pub sigma_d_i: f64,
    /// Settling cycles: turn-on events from the step to the first cycle
    /// after which every sample stays inside the band.
    pub n_t: usize,
    /// Settling time: duration of those `n_t` cycles, seconds.
    pub t_t: f64,
    /// False when the band is never held to the end of the trace; `n_t` and
    /// `t_t` are then censored at the trace end.
    pub settled: bool,
}

/// Measure a reference-step transition on a trace that starts at the step
/// instant. `v_e1`/`i_e1` describe the pre-step equilibrium, `v_e2`/`i_e2`
/// the target one (sampled-sequence values); `band` is the settling band as
/// a fraction of the step.
pub fn measure_step_metrics(
    trace: &Trace,
    v_e1: f64,
    v_e2: f64,
    i_e1: f64,
    i_e2: f64,
    band: f64,
) -> Result<StepMetrics> {
    if trace.cycles.is_empty() || trace.points.is_empty() {
        return Err(Error::InvalidParameter(
            "step metrics need a dense trace with cycle records".into(),
        ));
    }
    let dv = v_e2 - v_e1;
    let di = i_e2 - i_e1;
    let sign = if dv < 0.0 { -1.0 } else { 1.0 };
    let step = dv.abs().max(f64::MIN_POSITIVE);
    let istep = di.abs().max(f64::MIN_POSITIVE);

    let v: Vec<f64> = trace.cycles.iter().map(|c| c.v_sample).collect();
    let i: Vec<f64> = trace.cycles.iter().map(|c| c.i_extreme).collect();

    let sigma_d_v = v
        .iter()
        .map(|x| sign * (x - v_e2) / step)
        .fold(f64::NEG_INFINITY, f64::max);
    let sigma_d_i = i
        .iter()
        .map(|x| sign * (x - i_e2) / istep)
        .fold(f64::NEG_INFINITY, f64::max);

    // Settling on the sampled sequence: first index after which every
    // sample stays inside the band.
    let threshold = band * step;
    let mut settle_idx = v.len();
    for n in (0..v.len()).rev() {
        if (v[n] - v_e2).abs() <= threshold {
            settle_idx = n;
        } else {
            break;
        }
    }
    let settled = settle_idx + MIN_SETTLED_TAIL <= v.len();
    let n_t = if settled { settle_idx } else { v.len() };
    let t_start = trace.points[0].t;
    let t_t = if n_t == 0 {
        0.0
    } else {
        trace.cycles[n_t - 1].t_event - t_start
    };

    // Continuous overshoot beyond the settled ripple top.
    let peak_excess = trace
        .points
        .iter()
        .map(|p| sign * (p.v - v_e2))
        .fold(f64::NEG_INFINITY, f64::max);
    let tail_start = if settled && n_t < trace.cycles.len() {
        trace.cycles[n_t].t_event
    } else {
        // Censored: use the last recorded cycle as the ripple reference.
        trace.cycles[trace.cycles.len() - 1].t_sample
    };
    let ripple_top = trace
        .points
        .iter()
        .filter(|p| p.t >= tail_start)
        .map(|p| sign * (p.v - v_e2))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let sigma_t_v = sigma_d_v.max((peak_excess - ripple_top) / step);

    // Rise time 10 % -> 90 % on the dense trace.
    let lo = v_e1 + 0.1 * dv;
    let hi = v_e1 + 0.9 * dv;
    let t_lo = trace.points.iter().find(|p| sign * (p.v - lo) >= 0.0).map(|p| p.t);
    let t_hi = trace.points.iter().find(|p| sign * (p.v - hi) >= 0.0).map(|p| p.t);
    let rise_time_10_90 = match (t_lo, t_hi) {
        (Some(a), Some(b)) if b >= a => Some(b - a),
        _ => None,
    };

    Ok(StepMetrics {
        rise_time_10_90,
        sigma_t_v,
        sigma_d_v,
        sigma_d_i,
        n_t,
        t_t,
        settled,
    })
}

/// Outcome of checking one theorem-style inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: f64,
    pub measured: f64,
    pub holds: bool,
}

/// Settling-time bound: the physical settling time is bounded by
/// `rho N_t + gamma` with `gamma = (L/V_in)(I_e2 - I_e1)` and
/// `rho = T_off v_max / V_in`, where `v_max = V_e2 + sigma_d_v (V_e2 - V_e1)`
/// is the highest sampled voltage of the transition: no cycle period can
/// exceed the period at the highest voltage visited.
pub fn settling_time_bound(
    metrics: &StepMetrics,
    params: &CircuitParams,
    v_e1: f64,
    v_e2: f64,
    i_e1: f64,
    i_e2: f64,
) -> Result<BoundCheck> {
    if params.topology != Topology::BoostConstantOffTime {
        return Err(Error::Topology(
            "settling-time bound is stated for the constant off-time boost".into(),
        ));
    }
    let t_off = params.fixed_time;
    let t1 = v_e1 / params.v_in * t_off;
    let rho = t1 + (v_e2 - v_e1) / params.v_in * t_off * (1.0 + metrics.sigma_d_v);
    let gamma = params.inductance / params.v_in * (i_e2 - i_e1);
    let bound = rho * metrics.n_t as f64 + gamma;
    Ok(BoundCheck {
        bound,
        measured: metrics.t_t,
        holds: metrics.settled && metrics.t_t <= bound,
    })
}

/// Overshoot bound: the continuous voltage overshoot is bounded by
/// `(1 - (1-lambda) alpha) sigma_d_v + (1-lambda) alpha sigma_d_i` with
/// `alpha = T_off/(RC)`.
pub fn overshoot_bound(metrics: &StepMetrics, params: &CircuitParams) -> Result<BoundCheck> {
    if params.topology != Topology::BoostConstantOffTime {
        return Err(Error::Topology(
            "overshoot bound is stated for the constant off-time boost".into(),
        ));
    }
    let alpha = params.fixed_time / params.rc();
    let ac = (1.0 - params.lambda) * alpha;
    let bound = (1.0 - ac) * metrics.sigma_d_v + ac * metrics.sigma_d_i;
    Ok(BoundCheck {
        bound,
        measured: metrics.sigma_t_v,
        holds: metrics.sigma_t_v <= bound + 1e-12,
    })
}
