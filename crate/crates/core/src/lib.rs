//! Downlink massive MIMO with channel aging and oscillator phase noise:
//! Monte-Carlo simulation and large-system deterministic equivalents.

pub mod channel;
pub mod cli;
pub mod det_equiv;
pub mod downlink;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod numerics;
pub mod phase_noise;
pub mod scenario;

pub use error::{Error, Result};
