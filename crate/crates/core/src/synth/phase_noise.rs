//! Colored Gaussian phase-noise synthesis by spectral shaping.
//!
//! Each chirp gets an independent length-`count` realization built in the
//! frequency domain: bin `k` (`0 < k < count/2`) receives a circular complex
//! Gaussian with `E|X_k|² = S(f_k)·rate·count/2`, its mirror gets the
//! conjugate, and DC and Nyquist are left empty. The inverse DFT (scaled by
//! `1/count`) then has a one-sided periodogram whose expectation is exactly
//! `S(f_k)`, and zero sample mean.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::dsp;
use crate::error::{Error, Result};
use crate::model::{stream_rng, PhaseNoiseSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseNoiseRealization {
    /// One row of phase samples (radians) per chirp.
    pub samples: Vec<Vec<f64>>,
    /// RMS over every sample of every chirp.
    pub rms: f64,
}

impl PhaseNoiseRealization {
    pub fn zeros(count: usize, chirps: usize) -> Self {
        Self {
            samples: vec![vec![0.0; count]; chirps],
            rms: 0.0,
        }
    }

    pub fn chirp(&self, m: usize) -> &[f64] {
        &self.samples[m]
    }

    /// Every `step`-th sample of each row, starting at the first.
    pub fn decimated(&self, step: usize) -> Self {
        let step = step.max(1);
        let samples: Vec<Vec<f64>> = self
            .samples
            .iter()
            .map(|row| row.iter().step_by(step).copied().collect())
            .collect();
        let n = samples.iter().map(Vec::len).sum::<usize>().max(1) as f64;
        let rms = (samples.iter().flatten().map(|v| v * v).sum::<f64>() / n).sqrt();
        Self { samples, rms }
    }
}

/// Expected phase variance of `spec` sampled at `rate`: the sum of the PSD
/// over the non-DC, non-Nyquist bins of a length-`count` grid.
pub fn expected_variance(spec: &PhaseNoiseSpec, count: usize, rate: f64) -> f64 {
    let df = rate / count as f64;
    (1..count.div_ceil(2))
        .map(|k| spec.psd(k as f64 * df))
        .sum::<f64>()
        * df
}

pub(crate) fn check_band(spec: &PhaseNoiseSpec, rate: f64) -> Result<()> {
    if let Some(top) = spec.highest_offset() {
        if !(rate > 2.0 * top) {
            return Err(Error::BreakpointBandExceedsRate {
                offset_hz: top,
                rate_hz: rate,
            });
        }
    }
    Ok(())
}

pub(crate) fn realize(
    spec: &PhaseNoiseSpec,
    count: usize,
    chirps: usize,
    rate: f64,
    rng: &mut ChaCha20Rng,
) -> Result<PhaseNoiseRealization> {
    check_band(spec, rate)?;
    if spec.is_empty() || count == 0 {
        return Ok(PhaseNoiseRealization::zeros(count, chirps));
    }
    let df = rate / count as f64;
    let gains: Vec<f64> = (0..count.div_ceil(2))
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                (spec.psd(k as f64 * df) * rate * count as f64 / 4.0).sqrt()
            }
        })
        .collect();
    let plan = dsp::inverse_plan(count);
    let mut sum_sq = 0.0;
    let mut samples = Vec::with_capacity(chirps);
    let mut buf = vec![Complex64::new(0.0, 0.0); count];
    for _ in 0..chirps {
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (k, &g) in gains.iter().enumerate().skip(1) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(re * g, im * g);
            buf[k] = z;
            buf[count - k] = z.conj();
        }
        plan.process(&mut buf);
        let row: Vec<f64> = buf.iter().map(|z| z.re / count as f64).collect();
        sum_sq += row.iter().map(|v| v * v).sum::<f64>();
        samples.push(row);
    }
    let total = (count * chirps).max(1) as f64;
    Ok(PhaseNoiseRealization {
        samples,
        rms: (sum_sq / total).sqrt(),
    })
}

/// Synthesizes `chirps` independent phase-noise rows of `count` samples at
/// `rate` following `spec` (with the range correlation factor applied when
/// enabled).
pub fn synth_phase_noise(
    spec: &PhaseNoiseSpec,
    count: usize,
    chirps: usize,
    rate: f64,
    seed: u64,
) -> Result<PhaseNoiseRealization> {
    let mut rng = stream_rng(seed, 0);
    realize(spec, count, chirps, rate, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Averaged one-sided periodogram, independent of the synthesis path.
    fn averaged_periodogram(rows: &[Vec<f64>], rate: f64) -> Vec<f64> {
        let n = rows[0].len();
        let mut acc = vec![0.0; n / 2 + 1];
        for row in rows {
            // direct DFT would be too slow; rustfft is an independent transform
            let spec = dsp::spectrum(row, n, None);
            for (a, z) in acc.iter_mut().zip(&spec) {
                *a += 2.0 * z.norm_sqr() / (rate * n as f64);
            }
        }
        acc.iter().map(|a| a / rows.len() as f64).collect()
    }

    #[test]
    fn flat_spec_level() {
        let rate = 10e6;
        let pn = synth_phase_noise(&PhaseNoiseSpec::flat(-120.0), 1024, 200, rate, 11).unwrap();
        let p = averaged_periodogram(&pn.samples, rate);
        let mean_db = dsp::db(p[1..512].iter().sum::<f64>() / 511.0);
        assert!((mean_db + 120.0).abs() < 0.5, "{mean_db}");
        // per-bin: 200 averages keep every bin within 3 dB
        for (k, v) in p.iter().enumerate().take(512).skip(1) {
            assert!(
                (dsp::db(*v) + 120.0).abs() < 3.0,
                "bin {k}: {}",
                dsp::db(*v)
            );
        }
    }

    #[test]
    fn skirt_follows_breakpoints() {
        let rate = 10e6;
        let spec = PhaseNoiseSpec::skirt(&[(1e4, -90.0), (1e5, -110.0), (1e6, -130.0)]);
        let n = 2000;
        let pn = synth_phase_noise(&spec, n, 150, rate, 3).unwrap();
        let p = averaged_periodogram(&pn.samples, rate);
        let df = rate / n as f64;
        for k in [4usize, 20, 50, 200, 900] {
            let expect = spec.level_db(k as f64 * df).unwrap();
            // average 5 neighbouring bins to tighten the check
            let local: f64 = p[k - 2..=k + 2].iter().sum::<f64>() / 5.0;
            assert!((dsp::db(local) - expect).abs() < 3.0, "k={k}");
        }
    }

    #[test]
    fn empty_spec_is_zero() {
        let pn = synth_phase_noise(&PhaseNoiseSpec::none(), 64, 3, 1e6, 0).unwrap();
        assert!(pn.samples.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(pn.rms, 0.0);
    }

    #[test]
    fn rce_vanishes_with_delay() {
        let base = PhaseNoiseSpec::flat(-100.0);
        let big = synth_phase_noise(&base.clone().with_rce(1e-6), 512, 8, 1e6, 1).unwrap();
        let small = synth_phase_noise(&base.clone().with_rce(1e-12), 512, 8, 1e6, 1).unwrap();
        let zero = synth_phase_noise(&base.with_rce(0.0), 512, 8, 1e6, 1).unwrap();
        assert!(small.rms < 1e-4 * big.rms);
        assert_eq!(zero.rms, 0.0);
    }

    #[test]
    fn zero_mean_and_rms_matches_expectation() {
        let spec = PhaseNoiseSpec::flat(-100.0);
        let (n, rate) = (4096, 1e6);
        let pn = synth_phase_noise(&spec, n, 20, rate, 5).unwrap();
        let expected = expected_variance(&spec, n, rate).sqrt();
        assert!((pn.rms / expected - 1.0).abs() < 0.05);
        for row in &pn.samples {
            let mean = row.iter().sum::<f64>() / n as f64;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn breakpoint_beyond_nyquist() {
        let spec = PhaseNoiseSpec::skirt(&[(1e3, -80.0), (6e6, -140.0)]);
        assert!(matches!(
            synth_phase_noise(&spec, 16, 1, 10e6, 0),
            Err(Error::BreakpointBandExceedsRate { .. })
        ));
    }

    #[test]
    fn reproducible() {
        let spec = PhaseNoiseSpec::flat(-100.0);
        assert_eq!(
            synth_phase_noise(&spec, 100, 2, 1e6, 9).unwrap(),
            synth_phase_noise(&spec, 100, 2, 1e6, 9).unwrap()
        );
    }
}
