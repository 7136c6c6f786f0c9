//! Quadrature imbalance calibration on the leakage tone.
//!
//! With the I channel as reference, an imbalanced receiver delivers
//! `I = r·cos u`, `Q = r·A_E·sin(u + θ_E)`. Eliminating `u` gives the ellipse
//!
//! ```text
//! I²/cos²θ − 2·sinθ·I·Q/(A·cos²θ) + Q²/(A²·cos²θ) = r²
//! ```
//!
//! so for the fitted shape matrix `S` (any scale)
//! `A_E = sqrt(S11/S22)` and `sin θ_E = −S12/sqrt(S11·S22)`.
//! The correction `I' = I`, `Q' = −tanθ_E·I + Q/(A_E·cosθ_E)` restores
//! `Q' = r·sin u`.

mod ellipse;

pub use ellipse::{fit_ellipse_taubin, refine_ellipse_lm, EllipseFit, Termination};

use num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};
use crate::frame::{ComplexCube, FrameCube, IqFrames, RealCube};
use crate::model::WindowKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceEstimate {
    pub amplitude: f64,
    pub phase: f64,
    pub source_fit: EllipseFit,
}

impl ImbalanceEstimate {
    /// Imbalance from an ellipse fit of `(I, Q)` points.
    pub fn from_fit(fit: EllipseFit) -> Self {
        let s = fit.shape_matrix();
        let amplitude = (s[(0, 0)] / s[(1, 1)]).sqrt();
        let sin_theta = (-s[(0, 1)] / (s[(0, 0)] * s[(1, 1)]).sqrt()).clamp(-1.0, 1.0);
        Self {
            amplitude,
            phase: sin_theta.asin(),
            source_fit: fit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    /// Required peak-to-median ratio of the averaged I+jQ spectrum, dB.
    pub margin_db: f64,
    /// Chirps pooled for the fit; `None` uses the whole frame.
    pub chirps: Option<usize>,
    /// Geometric RMS tolerance relative to the major semi-axis.
    pub relative_tol: f64,
    pub max_iters: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            margin_db: 30.0,
            chirps: None,
            relative_tol: 1e-9,
            max_iters: 50,
        }
    }
}

/// Peak-to-median ratio of the chirp-averaged Hann spectrum of `I + jQ`, dB.
pub fn tone_prominence_db(i: &RealCube, q: &RealCube) -> f64 {
    let n = i.samples();
    let w = dsp::window(WindowKind::Hann, n);
    let mut acc = vec![0.0; n];
    for m in 0..i.chirps() {
        let row: Vec<Complex64> = i
            .chirp(m)
            .iter()
            .zip(q.chirp(m))
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        for (a, z) in acc.iter_mut().zip(dsp::spectrum(&row, n, Some(&w))) {
            *a += z.norm_sqr();
        }
    }
    let peak = acc.iter().copied().fold(0.0, f64::max);
    let med = dsp::median(&mut acc).unwrap_or(0.0);
    if med > 0.0 {
        dsp::db(peak / med)
    } else {
        f64::INFINITY
    }
}

/// Estimates `(A_E, θ_E)` from I/Q frames dominated by the leakage tone.
pub fn estimate_imbalance(i: &RealCube, q: &RealCube) -> Result<ImbalanceEstimate> {
    estimate_imbalance_with(i, q, &CalibrationConfig::default())
}

pub fn estimate_imbalance_with(
    i: &RealCube,
    q: &RealCube,
    config: &CalibrationConfig,
) -> Result<ImbalanceEstimate> {
    i.same_shape(q)?;
    if i.is_empty() {
        return Err(Error::EmptyFrame);
    }
    let chirps = config.chirps.unwrap_or(i.chirps());
    if chirps == 0 || chirps > i.chirps() {
        return Err(Error::TooFewChirps {
            requested: chirps,
            available: i.chirps(),
        });
    }
    let (i, q) = (i.truncated(chirps), q.truncated(chirps));
    let prominence = tone_prominence_db(&i, &q);
    if prominence < config.margin_db {
        return Err(Error::LowSnrForCalibration {
            measured_db: prominence,
            required_db: config.margin_db,
        });
    }
    let points: Vec<(f64, f64)> = i
        .as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(&a, &b)| (a, b))
        .collect();
    let init = fit_ellipse_taubin(&points)?;
    let tol = config.relative_tol * init.semi_axes.0;
    let fit = refine_ellipse_lm(&init, &points, tol, config.max_iters)?;
    Ok(ImbalanceEstimate::from_fit(fit))
}

/// Applies the inverse imbalance transform and returns `I' + jQ'`.
pub fn correct_iq(i: &RealCube, q: &RealCube, est: &ImbalanceEstimate) -> Result<ComplexCube> {
    correct_iq_with(i, q, est.amplitude, est.phase)
}

pub fn correct_iq_with(
    i: &RealCube,
    q: &RealCube,
    amplitude: f64,
    phase: f64,
) -> Result<ComplexCube> {
    i.same_shape(q)?;
    let cos = phase.cos();
    if cos.abs() < 1e-9 {
        return Err(Error::SingularTransform { cos_theta: cos });
    }
    let tan = phase.tan();
    let gain = 1.0 / (amplitude * cos);
    let meta = i.meta.tagged("iq-corrected");
    Ok(FrameCube::from_fn(
        i.samples(),
        i.chirps(),
        i.rate,
        meta,
        |n, m| {
            let a = i.get(n, m);
            Complex64::new(a, -tan * a + gain * q.get(n, m))
        },
    ))
}

/// Convenience over an [`IqFrames`] pair.
pub fn correct_frames(iq: &IqFrames, est: &ImbalanceEstimate) -> Result<ComplexCube> {
    correct_iq(&iq.i, &iq.q, est)
}

/// Image rejection ratio of an `(A_E, θ_E)` pair, dB. Infinite when balanced.
pub fn irr(amplitude: f64, phase: f64) -> f64 {
    let a2 = 1.0 + amplitude * amplitude;
    let cross = 2.0 * amplitude * phase.cos();
    let den = a2 - cross;
    if den <= 0.0 {
        return f64::INFINITY;
    }
    dsp::db((a2 + cross) / den)
}

/// Measured IRR of a complex frame: carrier-peak power over image-peak power
/// of the chirp-averaged Hann spectrum, dB. The image is searched within
/// ±3 bins of the mirrored carrier bin.
pub fn measured_irr(frames: &ComplexCube) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::EmptyFrame);
    }
    let n = frames.samples();
    let w = dsp::window(WindowKind::Hann, n);
    let mut acc = vec![0.0; n];
    for row in frames.rows() {
        for (a, z) in acc.iter_mut().zip(dsp::spectrum(row, n, Some(&w))) {
            *a += z.norm_sqr();
        }
    }
    let k = dsp::argmax_in(&acc, 0..n).ok_or(Error::PeakNotFound)?;
    let mirror = (n - k) % n;
    let image = (-3i64..=3)
        .map(|d| acc[(mirror as i64 + d).rem_euclid(n as i64) as usize])
        .fold(0.0, f64::max);
    if image <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(dsp::db(acc[k] / image))
}
