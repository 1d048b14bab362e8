//! Secrecy-rate power allocation for spectrum-sharing fading channels.
//!
//! A secondary transmitter talks to its receiver over a Rayleigh fading link
//! while an eavesdropper listens and a primary receiver tolerates only a
//! bounded received power. This crate provides:
//!
//! - [`fading`]: exponential power-gain model and reproducible sample streams,
//! - [`specfun`]: the exponential integral E₁ and its scaled variants,
//! - [`policy`]: the full-CSI, peak-limited, no-eavesdropper-CSI and on/off
//!   power rules as pure per-state functions,
//! - [`rate`]: Monte Carlo ergodic secrecy rates and the on/off closed form,
//! - [`calibrate`]: Lagrange multiplier calibration and on/off threshold search,
//! - [`oracle`]: brute-force maximizers that validate the closed forms,
//! - [`sweep`]: the experiment harness behind the `cogsec` CLI.
//!
//! All rates are in nats per channel use.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod error;
pub mod fading;
pub mod mc;
pub mod numeric;
pub mod oracle;
pub mod policy;
pub mod rate;
pub mod specfun;
pub mod sweep;

pub use calibrate::{CalibrationFlag, CalibrationReport, ConstraintSet};
pub use error::{Error, Result};
pub use fading::{ChannelState, FadingParams, SampleStream};
pub use mc::{RateEstimate, SampleSet};
pub use policy::{PolicyFamily, PolicySpec};
