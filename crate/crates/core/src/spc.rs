//! Stationary-point concentration on real oversampled IF frames.
//!
//! Per chirp, the leakage line is located with a windowless zero-padded FFT
//! restricted to the quarter-point neighbourhood, a real NCO is locked to it,
//! and the frame is multiplied by the NCO. The leakage difference term lands
//! at DC with amplitude `A/2`; sum terms near `2·f_hat` are left in place.

use std::f64::consts::TAU;
use std::ops::Range;

use rayon::prelude::*;

use crate::dsp;
use crate::error::{Error, Result};
use crate::frame::{FrameCube, RealCube, Sample};
use crate::model::SamplingPlan;

/// Per-chirp leakage line estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageEstimate {
    /// Zero-based FFT bin of the peak.
    pub k_index: Vec<usize>,
    /// Leakage frequency, Hz. Signed for quadrature frames.
    pub f_hat: Vec<f64>,
    /// Leakage phase at the first kept sample, radians in (−π, π].
    pub theta_hat: Vec<f64>,
    pub nfft_used: usize,
    /// Peak power over the median power of the searched bins, dB. A low value
    /// means no dominant line was found in the band.
    pub peak_to_median_db: Vec<f64>,
}

impl LeakageEstimate {
    pub fn chirps(&self) -> usize {
        self.f_hat.len()
    }

    /// Lowest peak-to-median ratio over all chirps, dB.
    pub fn weakest_peak_db(&self) -> f64 {
        self.peak_to_median_db
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Bins strictly between `nfft/8` and `3·nfft/8`.
pub fn spc_search_band(nfft: usize) -> Range<usize> {
    (nfft / 8 + 1)..(3 * nfft).div_ceil(8)
}

/// Shared estimator: per-chirp argmax of `|X|²` over `band`, with bin `k`
/// mapped to a frequency by `freq`.
pub(crate) fn estimate_in_band<T: Sample>(
    frames: &FrameCube<T>,
    nfft: usize,
    band: Range<usize>,
    freq: impl Fn(usize) -> f64 + Sync,
) -> Result<LeakageEstimate> {
    if frames.is_empty() {
        return Err(Error::EmptyFrame);
    }
    if nfft < frames.samples() {
        return Err(Error::DimensionMismatch {
            expected: format!("nfft >= {}", frames.samples()),
            got: nfft.to_string(),
        });
    }
    if band.is_empty() || band.end > nfft {
        return Err(Error::BandEmpty);
    }
    let per_chirp: Vec<(usize, f64, f64, f64)> = (0..frames.chirps())
        .into_par_iter()
        .map(|m| {
            let spec = dsp::spectrum(frames.chirp(m), nfft, None);
            let mut power: Vec<f64> = spec[band.clone()].iter().map(|z| z.norm_sqr()).collect();
            let rel = dsp::argmax_in(&power, 0..power.len()).expect("non-empty band");
            let k = band.start + rel;
            let peak = power[rel];
            let med = dsp::median(&mut power).expect("non-empty band");
            let ratio = if med > 0.0 {
                dsp::db(peak / med)
            } else {
                f64::INFINITY
            };
            (k, freq(k), spec[k].arg(), ratio)
        })
        .collect();
    Ok(LeakageEstimate {
        k_index: per_chirp.iter().map(|e| e.0).collect(),
        f_hat: per_chirp.iter().map(|e| e.1).collect(),
        theta_hat: per_chirp.iter().map(|e| e.2).collect(),
        nfft_used: nfft,
        peak_to_median_db: per_chirp.iter().map(|e| e.3).collect(),
    })
}

/// Locates the leakage line of each chirp of a real frame.
///
/// The search covers bins strictly inside `(nfft/8, 3·nfft/8)`. With a
/// zero-based peak index `k`, `f_hat = rate·k/nfft`.
pub fn estimate_leakage_spc(frames: &RealCube, nfft: usize) -> Result<LeakageEstimate> {
    let rate = frames.rate;
    estimate_in_band(frames, nfft, spc_search_band(nfft), |k| {
        rate * k as f64 / nfft as f64
    })
}

fn check_chirps(estimate: &LeakageEstimate, chirps: usize) -> Result<()> {
    if estimate.chirps() != chirps {
        return Err(Error::DimensionMismatch {
            expected: format!("{chirps} chirps"),
            got: format!("{} estimates", estimate.chirps()),
        });
    }
    Ok(())
}

/// Real NCO `cos(2π·f_hat·n/rate + theta_hat)`, one row per chirp.
pub fn make_nco_spc(estimate: &LeakageEstimate, samples: usize, rate: f64) -> RealCube {
    let rows: Vec<Vec<f64>> = (0..estimate.chirps())
        .map(|m| {
            let (f, th) = (estimate.f_hat[m], estimate.theta_hat[m]);
            (0..samples)
                .map(|n| (TAU * (f * n as f64 / rate).rem_euclid(1.0) + th).cos())
                .collect()
        })
        .collect();
    let meta = crate::frame::FrameMeta::default().tagged("nco");
    FrameCube::from_rows(rows, rate, meta).unwrap_or_else(|_| {
        FrameCube::from_vec(Vec::new(), samples, 0, rate, Default::default()).expect("empty")
    })
}

/// Multiplies a real frame by its locked NCO. Returns the output and the
/// estimate used.
pub fn run_spc_with_estimate(
    frames: &RealCube,
    nfft: usize,
) -> Result<(RealCube, LeakageEstimate)> {
    let estimate = estimate_leakage_spc(frames, nfft)?;
    let out = mix_with_nco(frames, &estimate)?;
    Ok((out, estimate))
}

pub fn run_spc(frames: &RealCube, nfft: usize) -> Result<RealCube> {
    run_spc_with_estimate(frames, nfft).map(|(out, _)| out)
}

/// Elementwise product of `frames` with the NCO built from `estimate`.
pub fn mix_with_nco(frames: &RealCube, estimate: &LeakageEstimate) -> Result<RealCube> {
    check_chirps(estimate, frames.chirps())?;
    let nco = make_nco_spc(estimate, frames.samples(), frames.rate);
    let meta = frames.meta.tagged("spc");
    Ok(FrameCube::from_fn(
        frames.samples(),
        frames.chirps(),
        frames.rate,
        meta,
        |n, m| frames.get(n, m) * nco.get(n, m),
    ))
}

/// Conventional down-conversion by a free-running real LO at `lo_hz`.
pub fn mix_with_lo(frames: &RealCube, lo_hz: f64) -> RealCube {
    let rate = frames.rate;
    let meta = frames.meta.tagged("lo");
    FrameCube::from_fn(frames.samples(), frames.chirps(), rate, meta, |n, m| {
        frames.get(n, m) * (TAU * (lo_hz * n as f64 / rate).rem_euclid(1.0)).cos()
    })
}

fn fold(f: f64, rate: f64) -> f64 {
    let r = f.rem_euclid(rate);
    r.min(rate - r)
}

/// Alias-free beat extent after SPC, Hz.
///
/// A target at beat `f_b` enters at `f_hat + f_b`, which must stay below
/// `rate/2`, and must not reach the folded leakage sum term at
/// `2·f_hat`. The worst chirp sets the limit.
pub fn spc_mur(plan: &SamplingPlan, estimate: &LeakageEstimate) -> f64 {
    let rate = plan.effective_rate();
    estimate
        .f_hat
        .iter()
        .map(|&f| (rate / 2.0 - f).min(fold(2.0 * f, rate)))
        .fold(f64::INFINITY, f64::min)
}

/// Direct single-bin DFT, used as a test oracle.
#[cfg(test)]
pub(crate) fn tone_bin(row: &[f64], k: usize) -> num_complex::Complex64 {
    let n = row.len();
    row.iter()
        .enumerate()
        .map(|(i, &x)| {
            x * num_complex::Complex64::from_polar(1.0, -TAU * ((k * i) % n) as f64 / n as f64)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameMeta;
    use crate::model::{PhaseNoiseSpec, RadarScenario, RandomLaw, TargetSpec};
    use crate::synth;
    use crate::testkit::*;
    use proptest::prelude::*;

    fn tone(n: usize, chirps: usize, rate: f64, f: f64, th: f64) -> RealCube {
        FrameCube::from_fn(n, chirps, rate, FrameMeta::default(), |i, _| {
            (TAU * f * i as f64 / rate + th).cos()
        })
    }

    #[test]
    fn exact_bin_tone() {
        let (n, rate) = (1024, 4e6);
        let f = 300.0 * rate / n as f64;
        let est = estimate_leakage_spc(&tone(n, 2, rate, f, 0.3), 4 * n).unwrap();
        assert_eq!(est.k_index, vec![1200, 1200]);
        assert!((est.theta_hat[0] - 0.3).abs() < 1e-9);
        assert!((est.f_hat[0] - f).abs() < 1e-9);
        assert_eq!(est.nfft_used, 4096);
    }

    #[test]
    fn band_is_exclusive() {
        assert_eq!(spc_search_band(64), 9..24);
        assert_eq!(spc_search_band(4), 1..2);
        let x = tone(4, 1, 4.0, 1.0, 0.0);
        assert!(matches!(
            estimate_leakage_spc(&x, 2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_frame() {
        let x = FrameCube::<f64>::from_vec(Vec::new(), 16, 0, 1.0, FrameMeta::default()).unwrap();
        assert!(matches!(
            estimate_leakage_spc(&x, 16),
            Err(Error::EmptyFrame)
        ));
    }

    #[test]
    fn table1_estimate_within_one_spacing() {
        let s = RadarScenario::preset("table1").unwrap().with_chirps(4);
        let syn = synth::synthesize_spc(&s).unwrap();
        let nfft = s.processing.nfft_estimation;
        let est = estimate_leakage_spc(&syn.frames, nfft).unwrap();
        let spacing = s.rate() / nfft as f64;
        assert!((spacing - 9.5367).abs() < 1e-4);
        for m in 0..4 {
            assert!((est.f_hat[m] - syn.truth.leakage_frequency[m]).abs() <= spacing);
        }
    }

    #[test]
    fn out_of_band_tone_is_flagged() {
        let (n, rate) = (1024, 4e6);
        let nfft = 8 * n;
        let inband = estimate_leakage_spc(&tone(n, 1, rate, rate / 4.0, 0.0), nfft).unwrap();
        let f_out = 40.0 * rate / n as f64; // below nfft/8
        let x = tone(n, 1, rate, f_out, 0.0);
        let est = estimate_leakage_spc(&x, nfft).unwrap();
        // oracle: full-band argmax finds the real line elsewhere
        let power: Vec<f64> = dsp::spectrum(x.chirp(0), nfft, None)
            .iter()
            .map(|z| z.norm_sqr())
            .collect();
        let full = dsp::argmax_in(&power, 0..nfft / 2).unwrap();
        assert_eq!(full, 320);
        assert_ne!(est.k_index[0], full);
        assert!(
            inband.weakest_peak_db() > 40.0,
            "{}",
            inband.weakest_peak_db()
        );
        assert!(
            est.weakest_peak_db() < inband.weakest_peak_db() - 25.0,
            "{}",
            est.weakest_peak_db()
        );
    }

    #[test]
    fn nco_examples() {
        let zero = LeakageEstimate {
            k_index: vec![0],
            f_hat: vec![0.0],
            theta_hat: vec![0.0],
            nfft_used: 8,
            peak_to_median_db: vec![0.0],
        };
        assert!(make_nco_spc(&zero, 8, 1.0)
            .as_slice()
            .iter()
            .all(|&v| v == 1.0));
        let quarter = LeakageEstimate {
            f_hat: vec![0.25],
            ..zero.clone()
        };
        let q = make_nco_spc(&quarter, 8, 1.0);
        let expect = [1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0];
        for (a, b) in q.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn nco_rms(k in 1usize..500, th in -3.14f64..3.14) {
            let n = 1024;
            let est = LeakageEstimate {
                k_index: vec![k],
                f_hat: vec![k as f64 / n as f64],
                theta_hat: vec![th],
                nfft_used: n,
                peak_to_median_db: vec![0.0],
            };
            let nco = make_nco_spc(&est, n, 1.0);
            let rms = (nco.as_slice().iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
            prop_assert!((rms - 0.5f64.sqrt()).abs() < 1e-9);
        }

        #[test]
        fn estimate_accuracy(f_frac in 0.13f64..0.37, th in -3.1f64..3.1) {
            let (n, rate, nfft) = (1024, 4e6, 1024 * 32);
            let f = f_frac * rate;
            let est = estimate_leakage_spc(&tone(n, 1, rate, f, th), nfft).unwrap();
            let spacing = rate / nfft as f64;
            prop_assert!((est.f_hat[0] - f).abs() <= spacing);
            let bound = TAU * spacing * (n as f64 / rate) / 2.0;
            prop_assert!(dsp::wrap_phase(est.theta_hat[0] - th).abs() <= bound);
        }
    }

    #[test]
    fn leakage_only_output_has_half_amplitude_dc() {
        let s = small_heterodyne();
        let x = synth::synth_spc_frames(&s).unwrap();
        let y = run_spc(&x, s.processing.nfft_estimation).unwrap();
        for m in 0..y.chirps() {
            let dc = y.chirp(m).iter().sum::<f64>() / y.samples() as f64;
            assert!((dc - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn target_moves_to_its_beat() {
        let mut s = small_heterodyne();
        s.targets
            .push(TargetSpec::point(0.1, range_for_bins(&s, 37.0), 0.0));
        let x = synth::synth_spc_frames(&s).unwrap();
        let y = run_spc(&x, s.processing.nfft_estimation).unwrap();
        let power: Vec<f64> = (0..200)
            .map(|k| tone_bin(y.chirp(0), k).norm_sqr())
            .collect();
        assert_eq!(dsp::argmax_in(&power, 1..200), Some(37));
        // difference term amplitude a/2
        assert!((power[37].sqrt() / 1024.0 - 0.025).abs() < 1e-9);
    }

    #[test]
    fn offset_rotation_is_cancelled() {
        let mut clean = small_heterodyne();
        clean
            .targets
            .push(TargetSpec::point(0.1, range_for_bins(&clean, 30.0), 3.0));
        let mut dirty = clean.clone();
        dirty.defects.f_offset = 3906.25;
        let out = |s: &RadarScenario| {
            let x = synth::synth_spc_frames(s).unwrap();
            run_spc(&x, s.processing.nfft_estimation).unwrap()
        };
        let (a, b) = (out(&clean), out(&dirty));
        for m in 0..a.chirps() {
            let (za, zb) = (tone_bin(a.chirp(m), 30), tone_bin(b.chirp(m), 30));
            assert!((za - zb).norm() < 1e-6 * za.norm(), "chirp {m}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn target_peak_independent_of_defects(
            offset in 0.0f64..20e3,
            half_width in 0.0f64..2e3,
            leak_bins in 0.0f64..20.0,
            seed in 0u64..1000,
        ) {
            let mut clean = small_heterodyne();
            clean.sweep.chirps = 2;
            clean.targets.push(TargetSpec::point(0.3, range_for_bins(&clean, 60.0), 0.0));
            let mut dirty = clean.clone();
            dirty.defects.f_offset = offset;
            dirty.defects.random_fast_time = RandomLaw::Uniform { half_width };
            dirty.defects.seed = seed;
            dirty.leakage.f_beat = leak_bins * 3906.25;
            let nfft = 8192;
            let w = dsp::window(crate::model::WindowKind::Hann, 1024);
            let peak = |s: &RadarScenario| {
                let x = synth::synth_spc_frames(s).unwrap();
                let y = run_spc(&x, s.processing.nfft_estimation).unwrap();
                let p: Vec<f64> = dsp::spectrum(y.chirp(1), nfft, Some(&w))
                    .iter()
                    .map(|z| z.norm_sqr())
                    .collect();
                dsp::argmax_in(&p, 8 * 40..8 * 80).unwrap() as i64
            };
            prop_assert!((peak(&clean) - peak(&dirty)).abs() <= 1);
        }
    }

    #[test]
    fn concentration_lowers_floor() {
        let mut s = small_heterodyne();
        s.sweep.chirps = 32;
        // falling skirt: a flat one would return through the sum term
        s.leakage.phase_noise =
            PhaseNoiseSpec::skirt(&[(1e3, -70.0), (1e4, -80.0), (1e5, -105.0), (1e6, -135.0)]);
        let syn = synth::synthesize_spc(&s).unwrap();
        assert!(syn.truth.leakage_phase_noise.rms > 0.005);
        let y = run_spc(&syn.frames, s.processing.nfft_estimation).unwrap();
        let avg = |cube: &RealCube, bins: Range<usize>| {
            let mut acc = 0.0;
            for m in 0..cube.chirps() {
                for k in bins.clone() {
                    acc += tone_bin(cube.chirp(m), k).norm_sqr();
                }
            }
            acc
        };
        // skirt around the leakage line (bin 260) vs the same offsets from DC
        let before = avg(&syn.frames, 270..300);
        let after = avg(&y, 10..40);
        assert!(
            dsp::db(before / after) > 20.0,
            "{}",
            dsp::db(before / after)
        );
    }

    #[test]
    fn mur_examples() {
        let plan = SamplingPlan::spc(1e6, crate::model::Ratio::new(4, 1), 0);
        let rate = plan.effective_rate();
        let est = |f: f64| LeakageEstimate {
            k_index: vec![0],
            f_hat: vec![f],
            theta_hat: vec![0.0],
            nfft_used: 1,
            peak_to_median_db: vec![0.0],
        };
        assert!((spc_mur(&plan, &est(rate / 4.0)) - rate / 4.0).abs() < 1e-9);
        assert!((spc_mur(&plan, &est(rate / 4.0 + 10e3)) - (rate / 4.0 - 10e3)).abs() < 1e-6);
        // below the quarter point the folded sum image recedes instead
        assert!((spc_mur(&plan, &est(rate / 4.0 - 10e3)) - (rate / 4.0 + 10e3)).abs() < 1e-6);
        // worst chirp wins
        let two = LeakageEstimate {
            f_hat: vec![rate / 4.0, rate / 4.0 + 5e3],
            ..est(0.0)
        };
        assert!((spc_mur(&plan, &two) - (rate / 4.0 - 5e3)).abs() < 1e-6);
    }

    #[test]
    fn conventional_lo_keeps_skirt() {
        let mut s = small_heterodyne();
        s.leakage.phase_noise = PhaseNoiseSpec::flat(-110.0);
        let x = synth::synth_spc_frames(&s).unwrap();
        let y = mix_with_lo(&x, s.sampling.if_carrier);
        // leakage line lands at its beat (4 bins), at half amplitude
        let p: Vec<f64> = (0..64)
            .map(|k| tone_bin(y.chirp(0), k).norm_sqr())
            .collect();
        assert_eq!(dsp::argmax_in(&p, 1..64), Some(4));
    }
}
