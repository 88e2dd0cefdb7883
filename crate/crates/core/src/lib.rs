//! Link-level simulation of time-reversal precoded impulse-radio links over
//! static multipath channels.
//!
//! The chain is: [`channel`] models and samples CIRs, [`trfilter`] builds
//! the precoding filters, [`correlation`] convolves, [`phy`] runs bits
//! through OOK, precoding, propagation, noise and energy detection, and
//! [`metrics`] measures SINR, focusing and peak statistics. [`cli`] drives
//! configured sweeps.

pub mod channel;
pub mod cli;
pub mod correlation;
pub mod error;
pub mod metrics;
pub mod phy;
pub mod trfilter;
pub mod waveform;

pub use error::{Error, Result};
pub use waveform::SampledWaveform;
