//! FMCW radar beat-signal simulator and leakage-mitigation pipelines.
//!
//! The crate synthesizes deramped beat signals (leakage, targets, oscillator
//! defects, phase noise, quadrature imbalance) and processes them with two
//! stationary-point-concentration pipelines:
//!
//! * [`spc`]: real oversampled IF signal, real NCO locked to the leakage.
//! * [`aspc`]: quadrature signal, internal I/Q imbalance calibration
//!   ([`iqcorr`]), complex NCO, conjugate mixing and real-part extraction.
//!
//! [`spectra`] turns frames into averaged spectra and range-Doppler maps, and
//! [`runner`] reproduces the leakage-only, moving-target and homodyne
//! experiments at desk scale.

pub mod aspc;
pub mod dsp;
pub mod error;
pub mod frame;
pub mod iqcorr;
pub mod model;
pub mod runner;
pub mod spc;
pub mod spectra;
pub mod synth;

pub use error::{Error, Result};
pub use frame::{AnyFrame, ComplexCube, FrameCube, FrameMeta, IqFrames, RealCube};
pub use model::{RadarScenario, TargetSpec};

#[cfg(test)]
pub(crate) mod testkit;
