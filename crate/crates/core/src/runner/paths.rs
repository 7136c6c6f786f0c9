//! Processing paths compared by the experiments, gain-normalized so a
//! leakage-free target keeps its amplitude on every path.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::aspc::{self, AspcOutput};
use crate::error::Result;
use crate::frame::{ComplexCube, FrameCube, IqFrames, RealCube};
use crate::iqcorr::CalibrationConfig;
use crate::spc::{self, LeakageEstimate};

/// Real IF frame down-converted by the free-running LO, times two.
pub fn none_real(x: &RealCube, lo_hz: f64) -> RealCube {
    let mut y = spc::mix_with_lo(x, lo_hz);
    y.scale(2.0);
    y.meta = x.meta.tagged("none");
    y
}

/// SPC output times two.
pub fn spc_real(x: &RealCube, nfft: usize) -> Result<(RealCube, LeakageEstimate)> {
    let (mut y, est) = spc::run_spc_with_estimate(x, nfft)?;
    y.scale(2.0);
    Ok((y, est))
}

/// Quadrature frame shifted down by the free-running LO, real part kept.
pub fn none_quadrature(z: &ComplexCube, lo_hz: f64) -> RealCube {
    let rate = z.rate;
    let meta = z.meta.tagged("none-q");
    FrameCube::from_fn(z.samples(), z.chirps(), rate, meta, |n, m| {
        let lo = Complex64::from_polar(1.0, -TAU * (lo_hz * n as f64 / rate).rem_euclid(1.0));
        (z.get(n, m) * lo).re
    })
}

pub fn aspc_quadrature(
    iq: &IqFrames,
    nfft: usize,
    use_iq_correction: bool,
    config: &CalibrationConfig,
) -> Result<AspcOutput> {
    aspc::run_aspc_detailed(&iq.i, &iq.q, nfft, use_iq_correction, config)
}
