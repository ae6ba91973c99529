//! Closed-form linearized cycle plants.
//!
//! Linearizing the sampled cycle map about a CCM operating point gives the
//! two-input one-output recursion
//!
//! ```text
//! v~[n+1] = gamma_v v~[n] + gamma_i i~[n] + gamma_im1 i~[n-1]
//! ```
//!
//! whose transfer function is `g1 (1 - b1 z^-1) z^-1 / (1 - a1 z^-1)`.

use serde::{Deserialize, Serialize};

use crate::converter::{command_for_voltage, find_equilibrium, CircuitParams, Topology};
use crate::error::{Error, Result};

/// Steady-state cycle quantities at one output voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Output voltage, volts.
    pub v_out: f64,
    /// Equilibrium current extreme (peak for boost, valley for buck),
    /// amperes.
    pub i_extreme: f64,
    /// Steady comparator-controlled interval, seconds.
    pub t_controlled_ss: f64,
    /// Steady switching period, seconds.
    pub t_s_ss: f64,
}

impl OperatingPoint {
    /// Operating point from the lossless steady-state relations.
    pub fn ideal(params: &CircuitParams, v_out: f64) -> Result<Self> {
        check_ccm_ordering(params, v_out)?;
        let r = params.load_resistance;
        let l = params.inductance;
        match params.topology {
            Topology::BoostConstantOffTime => {
                let t_on = params.fixed_time * (v_out - params.v_in) / params.v_in;
                let i_peak = v_out * v_out / (r * params.v_in)
                    + (v_out - params.v_in) * params.fixed_time / (2.0 * l);
                Ok(OperatingPoint {
                    v_out,
                    i_extreme: i_peak,
                    t_controlled_ss: t_on,
                    t_s_ss: params.fixed_time + t_on,
                })
            }
            Topology::BuckConstantOnTime => {
                let t_off = params.fixed_time * (params.v_in - v_out) / v_out;
                let i_valley =
                    v_out / r - params.fixed_time * (params.v_in - v_out) / (2.0 * l);
                Ok(OperatingPoint {
                    v_out,
                    i_extreme: i_valley,
                    t_controlled_ss: t_off,
                    t_s_ss: params.fixed_time + t_off,
                })
            }
        }
    }

    /// Operating point measured from the simulator's own fixed point at the
    /// target sampled voltage.
    pub fn from_simulation(params: &CircuitParams, v_out: f64) -> Result<Self> {
        let command = command_for_voltage(params, v_out)?;
        let eq = find_equilibrium(params, command, 40_000, 1e-13)?;
        Ok(OperatingPoint {
            v_out: eq.v_sample,
            i_extreme: eq.i_extreme,
            t_controlled_ss: eq.controlled_duration,
            t_s_ss: eq.period,
        })
    }
}

fn check_ccm_ordering(params: &CircuitParams, v_out: f64) -> Result<()> {
    match params.topology {
        Topology::BoostConstantOffTime if v_out <= params.v_in => Err(Error::Topology(format!(
            "boost operating point {v_out} V must exceed the {} V input",
            params.v_in
        ))),
        Topology::BuckConstantOnTime if v_out >= params.v_in => Err(Error::Topology(format!(
            "buck operating point {v_out} V must stay below the {} V input",
            params.v_in
        ))),
        _ if v_out <= 0.0 => Err(Error::Topology(format!(
            "operating point {v_out} V must be positive"
        ))),
        _ => Ok(()),
    }
}

/// Linearized cycle plant about one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantCoefficients {
    /// Pole of the z-domain plant.
    pub a1: f64,
    /// Zero of the z-domain plant.
    pub b1: f64,
    /// Gain, ohms.
    pub g1: f64,
    /// Raw recursion coefficients.
    pub gamma_v: f64,
    pub gamma_i: f64,
    pub gamma_im1: f64,
    /// Time-scale ratios the closed forms are built from, when they exist
    /// for the construction that produced this plant.
    pub tau1_hat: Option<f64>,
    pub tau2_hat: Option<f64>,
    pub tau3_hat: Option<f64>,
    /// Buck conversion-ratio parameter (V_in - V_out)/V_out.
    pub m_r: Option<f64>,
    /// Sampling fraction the plant was derived at.
    pub lambda: f64,
    /// Set when the zero b1 = d1/d2 is numerically unreliable
    /// (|d2| < 1e-12 |d1|).
    pub singular_zero: bool,
}

impl PlantCoefficients {
    /// Plant from its z-domain pole/zero/gain (for example a measured fit).
    pub fn from_z_domain(a1: f64, b1: f64, g1: f64, lambda: f64) -> Self {
        PlantCoefficients {
            a1,
            b1,
            g1,
            gamma_v: a1,
            gamma_i: g1,
            gamma_im1: -g1 * b1,
            tau1_hat: None,
            tau2_hat: None,
            tau3_hat: None,
            m_r: None,
            lambda,
            singular_zero: false,
        }
    }

    /// Steady-state gain of the recursion, ohms.
    pub fn dc_gain(&self) -> f64 {
        (self.gamma_i + self.gamma_im1) / (1.0 - self.gamma_v)
    }
}

/// Closed-form buck plant.
pub fn buck_plant(params: &CircuitParams, op: &OperatingPoint) -> Result<PlantCoefficients> {
    if !params.topology.is_buck() {
        return Err(Error::Topology("buck_plant needs a buck topology".into()));
    }
    check_ccm_ordering(params, op.v_out)?;
    let r = params.load_resistance;
    let t_on = params.fixed_time;
    let lambda = params.lambda;
    let m_r = (params.v_in - op.v_out) / op.v_out;
    let tau1 = params.rc() / t_on;
    let tau2 = (params.inductance / r) / t_on;
    let q1 = 1.0 / tau1;
    let q2 = 1.0 / tau2;

    let gamma_v = 1.0 - (1.0 + m_r) * q1 - 0.5 * (1.0 + m_r) * q1 * q2;
    let gamma_i = r * (lambda + 0.5 * m_r) * q1;
    let gamma_im1 = r * (1.0 - lambda + 0.5 * m_r) * q1;

    Ok(PlantCoefficients {
        a1: gamma_v,
        b1: -gamma_im1 / gamma_i,
        g1: gamma_i,
        gamma_v,
        gamma_i,
        gamma_im1,
        tau1_hat: Some(tau1),
        tau2_hat: Some(tau2),
        tau3_hat: None,
        m_r: Some(m_r),
        lambda,
        singular_zero: false,
    })
}

/// Closed-form boost plant.
pub fn boost_plant(params: &CircuitParams, op: &OperatingPoint) -> Result<PlantCoefficients> {
    if !params.topology.is_boost() {
        return Err(Error::Topology("boost_plant needs a boost topology".into()));
    }
    check_ccm_ordering(params, op.v_out)?;
    let r = params.load_resistance;
    let t_off = params.fixed_time;
    let lambda = params.lambda;
    let tau1 = params.rc() / t_off;
    let tau2 = (params.inductance / r) / t_off;
    let tau3 = params.rc() / op.t_controlled_ss;
    let q1 = 1.0 / tau1;
    let q2 = 1.0 / tau2;
    let q3 = 1.0 / tau3;

    let a1 = 1.0 - 2.0 * (q1 + q3)
        - 0.5 * (lambda * lambda + (1.0 - lambda) * (1.0 - lambda)) * q1 * q2;
    let common = lambda * q1 + 0.5 * lambda * lambda * q1 * q2 - 1.0;
    let d1 = common * (q1 + q3)
        - (1.0 + (1.0 - lambda) * q1 - 2.0 * (q1 + q3) - 0.5 * lambda * lambda * q1 * q2)
            * (1.0 - lambda)
            * q1
            * q2;
    let d2 = common * (q1 + q3) + lambda * q1 * q2;
    let g1 = (lambda * q1
        - (1.0 - lambda * q1 - 0.5 * lambda * lambda * q1 * q2) * (q1 + q3) / q2)
        * r;
    let singular_zero = d2.abs() < 1e-12 * d1.abs();
    let b1 = d1 / d2;

    Ok(PlantCoefficients {
        a1,
        b1,
        g1,
        gamma_v: a1,
        gamma_i: g1,
        gamma_im1: -g1 * b1,
        tau1_hat: Some(tau1),
        tau2_hat: Some(tau2),
        tau3_hat: Some(tau3),
        m_r: None,
        lambda,
        singular_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    #[test]
    fn buck_zero_is_minus_one_at_symmetric_sampling() {
        // b1 = -(1 - lambda + M_r/2)/(lambda + M_r/2) = -1 whenever
        // lambda = 0.5, independent of M_r.
        let p = presets::table1_buck();
        let op = OperatingPoint::ideal(&p, 1.8).unwrap();
        let plant = buck_plant(&p, &op).unwrap();
        assert_relative_eq!(plant.b1, -1.0, max_relative = 1e-12);
    }

    #[test]
    fn buck_plant_hand_evaluation() {
        // R = 0.162 ohm, tau1 = 324, tau2 = 12.346, M_r = 3.4444.
        let p = presets::table1_buck();
        let op = OperatingPoint::ideal(&p, 1.8).unwrap();
        let plant = buck_plant(&p, &op).unwrap();
        assert_relative_eq!(plant.a1, 0.985_727, max_relative = 1e-4);
        assert_relative_eq!(plant.g1, 1.111_1e-3, max_relative = 1e-3);
        assert!(plant.a1.abs() < 1.0);
    }

    #[test]
    fn buck_plant_rejects_inverted_conversion() {
        let p = presets::table1_buck();
        let op = OperatingPoint {
            v_out: 9.0,
            i_extreme: 1.0,
            t_controlled_ss: 1e-7,
            t_s_ss: 2e-7,
        };
        assert!(buck_plant(&p, &op).is_err());
    }

    #[test]
    fn boost_pole_tends_to_one_in_lossfree_limit() {
        let p = presets::table2_boost();
        let op = OperatingPoint::ideal(&p, 40.0).unwrap();
        let mut q = p;
        // tau1, tau2, tau3 -> infinity: scale R*C up, L up, keep ratios.
        q.capacitance = 1.0;
        q.inductance = 1.0;
        let big = OperatingPoint {
            t_controlled_ss: op.t_controlled_ss,
            ..op
        };
        let plant = boost_plant(&q, &big).unwrap();
        assert!(plant.a1 > 0.999_99);
    }

    #[test]
    fn boost_plant_hand_evaluation_at_40v() {
        // tau1 = 500, tau2 = 0.34, tau3 = 214.29 with T_on = 466.7 ns.
        let p = presets::table2_boost();
        let op = OperatingPoint::ideal(&p, 40.0).unwrap();
        assert_relative_eq!(op.t_controlled_ss, 466.666_7e-9, max_relative = 1e-6);
        let plant = boost_plant(&p, &op).unwrap();
        assert_relative_eq!(plant.a1, 0.985_196, max_relative = 1e-5);
        assert_relative_eq!(plant.g1, -0.126_273, max_relative = 1e-4);
        assert_relative_eq!(plant.b1, 2.573_5, max_relative = 1e-4);
        assert!(!plant.singular_zero);
        assert!(plant.a1.abs() < 1.0);
    }

    #[test]
    fn boost_plant_rejects_step_down_point() {
        let p = presets::table2_boost();
        let op = OperatingPoint {
            v_out: 11.0,
            i_extreme: 1.0,
            t_controlled_ss: 1e-7,
            t_s_ss: 3e-7,
        };
        assert!(boost_plant(&p, &op).is_err());
    }

    #[test]
    fn ideal_operating_points_match_simulator_fixed_points() {
        let p = presets::table2_boost();
        let ideal = OperatingPoint::ideal(&p, 40.0).unwrap();
        let sim = OperatingPoint::from_simulation(&p, 40.0).unwrap();
        assert_relative_eq!(ideal.t_controlled_ss, sim.t_controlled_ss, max_relative = 1e-3);
        assert_relative_eq!(ideal.i_extreme, sim.i_extreme, max_relative = 1e-2);

        let b = presets::table1_buck();
        let ideal_b = OperatingPoint::ideal(&b, 1.8).unwrap();
        let sim_b = OperatingPoint::from_simulation(&b, 1.8).unwrap();
        assert_relative_eq!(
            ideal_b.t_controlled_ss,
            sim_b.t_controlled_ss,
            max_relative = 1e-3
        );
    }
}
