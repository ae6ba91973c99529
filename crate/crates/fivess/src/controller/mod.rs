//! Cycle-synchronous PI compensation: the one-pole-one-zero controller,
//! closed-loop pole computation, constrained gain search, and the
//! current-loop design tables.

mod current_loop;
mod design;

pub use current_loop::{
    current_loop_design, settling_cycles_nw, worst_overshoot_ow, CurrentLoopDesign,
    CurrentLoopKind,
};
pub use design::{closed_loop_poles, design_s2pi, discrete_step_response, DesignSpec, GainGrid};

use serde::{Deserialize, Serialize};

use crate::converter::{CommandSource, CycleStart};

/// One-pole-one-zero compensator `K(z) = k (1 - z_k z^-1)/(1 - p_k z^-1)`
/// updated once per switching cycle, with one sample of memory and
/// conditional-integration anti-windup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S2PiController {
    /// Gain k, amperes per volt.
    pub gain: f64,
    /// Zero z_k.
    pub zero: f64,
    /// Pole p_k (1 for a pure integrator).
    pub pole: f64,
    /// Output clamp, amperes.
    pub command_min: f64,
    pub command_max: f64,
    /// Previous command u[n-1].
    prev_output: f64,
    /// Previous error e[n-1].
    prev_error: f64,
    /// Whether the last update hit a clamp.
    saturated: bool,
}

impl S2PiController {
    pub fn new(gain: f64, zero: f64, pole: f64) -> Self {
        S2PiController {
            gain,
            zero,
            pole,
            command_min: f64::NEG_INFINITY,
            command_max: f64::INFINITY,
            prev_output: 0.0,
            prev_error: 0.0,
            saturated: false,
        }
    }

    pub fn with_limits(mut self, min: f64, max: f64) -> Self {
        self.command_min = min;
        self.command_max = max;
        self
    }

    /// Seed the one-sample memory, e.g. with the equilibrium command for a
    /// bumpless start or handover.
    pub fn reseed(&mut self, prev_output: f64, prev_error: f64) {
        self.prev_output = prev_output;
        self.prev_error = prev_error;
        self.saturated = false;
    }

    /// One cycle-synchronous update:
    /// `u[n] = p_k u[n-1] + k (e[n] - z_k e[n-1])`, clamped to the command
    /// limits. Storing the clamped value freezes the recursive state while
    /// saturated.
    pub fn step(&mut self, error: f64) -> f64 {
        let raw = self.pole * self.prev_output + self.gain * (error - self.zero * self.prev_error);
        let out = raw.clamp(self.command_min, self.command_max);
        self.saturated = out != raw;
        self.prev_output = out;
        self.prev_error = error;
        out
    }

    pub fn saturated(&self) -> bool {
        self.saturated
    }

    pub fn last_output(&self) -> f64 {
        self.prev_output
    }
}

/// Closed-loop command source: per cycle, compare the fresh voltage sample
/// against a reference program and step the compensator.
pub struct ClosedLoop<F: FnMut(usize) -> f64> {
    pub controller: S2PiController,
    reference: F,
}

impl<F: FnMut(usize) -> f64> ClosedLoop<F> {
    pub fn new(controller: S2PiController, reference: F) -> Self {
        ClosedLoop {
            controller,
            reference,
        }
    }
}

impl<F: FnMut(usize) -> f64> CommandSource for ClosedLoop<F> {
    fn command(&mut self, ctx: &CycleStart<'_>) -> f64 {
        let r = (self.reference)(ctx.n);
        self.controller.step(r - ctx.v_sample)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_error_from_zero_state_stays_zero() {
        let mut c = S2PiController::new(62.0, 0.975, 1.0);
        for _ in 0..10 {
            assert_eq!(c.step(0.0), 0.0);
        }
    }

    #[test]
    fn pure_integrator_accumulates() {
        // p_k = 1, z_k = 0: u[n] = u[n-1] + k e[n].
        let mut c = S2PiController::new(2.0, 0.0, 1.0);
        let mut acc = 0.0;
        for e in [1.0, -0.5, 0.25, 2.0] {
            acc += 2.0 * e;
            assert_relative_eq!(c.step(e), acc);
        }
    }

    #[test]
    fn constant_error_ramps_at_expected_slope() {
        // After the first cycle the increment is k (1 - z_k) e0.
        let (k, zk, e0) = (3.0, 0.6, 0.7);
        let mut c = S2PiController::new(k, zk, 1.0);
        let mut prev = c.step(e0);
        for _ in 0..5 {
            let out = c.step(e0);
            assert_relative_eq!(out - prev, k * (1.0 - zk) * e0, max_relative = 1e-12);
            prev = out;
        }
    }

    #[test]
    fn anti_windup_freezes_state_at_clamp() {
        let mut c = S2PiController::new(10.0, 0.0, 1.0).with_limits(-1.0, 1.0);
        for _ in 0..50 {
            assert_eq!(c.step(1.0), 1.0);
        }
        assert!(c.saturated());
        // Recovery is immediate once the error reverses: no wound-up charge.
        let out = c.step(-0.05);
        assert_relative_eq!(out, 1.0 - 0.5);
    }
}
