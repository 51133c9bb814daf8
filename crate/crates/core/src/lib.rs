//! Voice conversion in the presence of background sound.
//!
//! The pipeline cascades a complex-mask source separation network, a frozen
//! bottleneck feature extractor and a voice conversion network, trained under
//! a three-stage multi-task schedule. This crate holds the whole stack: the
//! spectral substrate ([`dsp`]), the differentiable loss suite ([`losses`]),
//! the networks ([`separator`], [`bottleneck`], [`vc`]), SNR-controlled data
//! mixing ([`data`]), the stage trainer ([`train`]) and objective evaluation
//! ([`eval`]).

pub mod bottleneck;
pub mod config;
pub mod data;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod figures;
pub mod losses;
pub mod nn;
pub mod separator;
pub mod store;
pub mod tape;
pub mod train;
pub mod vc;
pub mod wav;

pub use error::{Error, Result};
