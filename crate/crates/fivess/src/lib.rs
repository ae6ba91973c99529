//! Cycle-exact simulation, discrete modeling, compensator design and
//! stability certificates for variable-frequency current-mode dc-dc
//! converters sampled once per switching cycle.
//!
//! The crate works in a switching-synchronized sampled state space: every
//! switching cycle contributes exactly one voltage sample (taken a fixed
//! fraction into the constant switch interval) and one current command. The
//! [`converter`] module steps the switched-affine dynamics exactly from
//! event to event; [`model`] derives the linearized cycle plant between
//! those samples and can reconstruct the continuous waveform back from
//! them; [`controller`] designs and runs the cycle-synchronous PI
//! compensator; [`certify`] evaluates the stability and performance
//! bounds as runnable checks; [`scheduler`] chains operating points for
//! large reference steps.
//!
//! Runnable walk-throughs for each capability live under `examples/`; a
//! thin `fivess` binary exposes the batch interface.

pub mod certify;
pub mod cli;
pub mod controller;
pub mod converter;
pub mod error;
mod mat2;
pub mod model;
pub mod presets;
pub mod scenario;
pub mod scheduler;

pub use error::{Error, Result};
