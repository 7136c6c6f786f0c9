//! Stationary-point concentration on quadrature frames.
//!
//! The complex leakage line is located over the full two-sided spectrum, a
//! unit complex NCO is locked to it, the signal is multiplied by the NCO's
//! conjugate and the real part is kept. The leakage becomes `A·cos(φ)` at DC
//! and no sum terms are produced. Heterodyne frames are first corrected for
//! quadrature imbalance using the leakage itself.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::Result;
use crate::frame::{ComplexCube, FrameCube, IqFrames, RealCube};
use crate::iqcorr::{self, CalibrationConfig, ImbalanceEstimate};
use crate::model::SamplingPlan;
use crate::spc::{estimate_in_band, LeakageEstimate};

/// Signed frequency of bin `k` in `(−rate/2, rate/2]`.
pub fn signed_bin_frequency(k: usize, nfft: usize, rate: f64) -> f64 {
    let k = k as f64;
    let n = nfft as f64;
    if 2.0 * k <= n {
        rate * k / n
    } else {
        rate * (k - n) / n
    }
}

/// Per-chirp leakage estimate over every bin of the zero-padded complex
/// spectrum.
pub fn estimate_leakage_aspc(frames: &ComplexCube, nfft: usize) -> Result<LeakageEstimate> {
    let rate = frames.rate;
    estimate_in_band(frames, nfft, 0..nfft, |k| {
        signed_bin_frequency(k, nfft, rate)
    })
}

/// Unit complex NCO `exp(j·(2π·f_hat·n/rate + theta_hat))`.
pub fn make_nco_aspc(estimate: &LeakageEstimate, samples: usize, rate: f64) -> ComplexCube {
    let meta = crate::frame::FrameMeta::default().tagged("nco");
    FrameCube::from_fn(samples, estimate.chirps(), rate, meta, |n, m| {
        let phase =
            TAU * (estimate.f_hat[m] * n as f64 / rate).rem_euclid(1.0) + estimate.theta_hat[m];
        Complex64::new(phase.cos(), phase.sin())
    })
}

/// Everything produced by one pass of the quadrature pipeline.
#[derive(Debug, Clone)]
pub struct AspcOutput {
    /// Real output.
    pub output: RealCube,
    /// Conjugate-mixed signal before the real part is taken.
    pub mixed: ComplexCube,
    pub estimate: LeakageEstimate,
    pub imbalance: Option<ImbalanceEstimate>,
}

/// Conjugate mixing and real-part extraction on an already complex signal.
pub fn run_aspc_complex(z: &ComplexCube, nfft: usize) -> Result<AspcOutput> {
    let estimate = estimate_leakage_aspc(z, nfft)?;
    let nco = make_nco_aspc(&estimate, z.samples(), z.rate);
    let mixed = FrameCube::from_fn(
        z.samples(),
        z.chirps(),
        z.rate,
        z.meta.tagged("aspc-mixed"),
        |n, m| z.get(n, m) * nco.get(n, m).conj(),
    );
    let mut output = mixed.re();
    output.meta = z.meta.tagged("aspc");
    Ok(AspcOutput {
        output,
        mixed,
        estimate,
        imbalance: None,
    })
}

/// Full pipeline with the default calibration settings.
pub fn run_aspc(
    i: &RealCube,
    q: &RealCube,
    nfft: usize,
    use_iq_correction: bool,
) -> Result<RealCube> {
    run_aspc_detailed(i, q, nfft, use_iq_correction, &CalibrationConfig::default())
        .map(|o| o.output)
}

pub fn run_aspc_detailed(
    i: &RealCube,
    q: &RealCube,
    nfft: usize,
    use_iq_correction: bool,
    config: &CalibrationConfig,
) -> Result<AspcOutput> {
    i.same_shape(q)?;
    let (z, imbalance) = if use_iq_correction {
        let est = iqcorr::estimate_imbalance_with(i, q, config)?;
        (iqcorr::correct_iq(i, q, &est)?, Some(est))
    } else {
        (IqFrames::new(i.clone(), q.clone())?.to_complex(), None)
    };
    let mut out = run_aspc_complex(&z, nfft)?;
    out.imbalance = imbalance;
    Ok(out)
}

/// Alias-free beat extent after real-part extraction: half the rate.
pub fn aspc_mur(plan: &SamplingPlan) -> f64 {
    plan.effective_rate() / 2.0
}
