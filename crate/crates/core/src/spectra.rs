//! Averaged power spectra, range-Doppler maps, noise floors, SNR and
//! improvement curves.
//!
//! Levels are in dB relative to full scale (1 V amplitude). Density scaling
//! gives V²/Hz, power scaling gives the power of an on-bin sinusoid.
//!
//! CSV exports use fixed headers:
//! * spectrum: `freq_hz,range_m,power_db`
//! * range-Doppler map (long format): `range_m,velocity_mps,power_db`
//! * improvement curve: `freq_hz,range_m,improvement_db`

use std::io::Write;
use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dsp;
use crate::error::{Error, Result};
use crate::frame::{FrameCube, Sample};
use crate::model::{TargetSpec, WindowKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    /// Power spectral density, V²/Hz.
    Density,
    /// Sinusoid power, V².
    Power,
}

/// Peaks count when they stand this far above the band median, dB.
pub const PEAK_THRESHOLD_DB: f64 = 10.0;
/// Bins excluded on each side of a detected peak by default.
pub const DEFAULT_GUARD_BINS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub power_db: Vec<f64>,
    pub freq_hz: Vec<f64>,
    pub range_m: Vec<f64>,
    pub n_averaged: usize,
    pub window: WindowKind,
    pub scaling: Scaling,
    pub nfft: usize,
    /// Noise floor over the whole axis with the default guard, dB. NaN when
    /// nothing is left after removing the peaks.
    pub floor_estimate: f64,
}

impl PowerSpectrum {
    /// Spectrum from precomputed values (the range axis is optional).
    pub fn from_parts(power_db: Vec<f64>, freq_hz: Vec<f64>, range_per_hz: f64) -> Result<Self> {
        if power_db.len() != freq_hz.len() || power_db.is_empty() {
            return Err(Error::AxisMismatch);
        }
        let range_m = freq_hz.iter().map(|f| f * range_per_hz).collect();
        let mut s = Self {
            power_db,
            freq_hz,
            range_m,
            n_averaged: 1,
            window: WindowKind::Rectangular,
            scaling: Scaling::Power,
            nfft: 0,
            floor_estimate: f64::NAN,
        };
        s.nfft = s.len();
        s.floor_estimate = s.default_floor();
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.power_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power_db.is_empty()
    }

    pub fn bin_width(&self) -> f64 {
        if self.freq_hz.len() > 1 {
            self.freq_hz[1] - self.freq_hz[0]
        } else {
            0.0
        }
    }

    /// Indices whose frequency lies in `[lo, hi]`.
    pub fn band_bins(&self, lo: f64, hi: f64) -> Range<usize> {
        let start = self.freq_hz.partition_point(|&f| f < lo);
        let end = self.freq_hz.partition_point(|&f| f <= hi);
        start..end.max(start)
    }

    pub fn nearest_bin(&self, freq: f64) -> usize {
        let i = self.freq_hz.partition_point(|&f| f < freq);
        if i == 0 {
            0
        } else if i >= self.len() {
            self.len() - 1
        } else if (self.freq_hz[i] - freq).abs() < (freq - self.freq_hz[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }

    /// Copy keeping only the bins whose frequency lies in `[lo, hi]`.
    pub fn restricted(&self, lo: f64, hi: f64) -> Result<Self> {
        let bins = self.band_bins(lo, hi);
        if bins.is_empty() {
            return Err(Error::BandEmpty);
        }
        let mut out = Self {
            power_db: self.power_db[bins.clone()].to_vec(),
            freq_hz: self.freq_hz[bins.clone()].to_vec(),
            range_m: self.range_m[bins].to_vec(),
            floor_estimate: f64::NAN,
            ..self.clone()
        };
        out.floor_estimate = out.default_floor();
        Ok(out)
    }

    fn default_floor(&self) -> f64 {
        let all = (self.freq_hz[0], self.freq_hz[self.len() - 1]);
        noise_floor(self, all.0..=all.1, DEFAULT_GUARD_BINS).unwrap_or(f64::NAN)
    }
}

fn scaled_window(kind: WindowKind, n: usize) -> (Vec<f64>, f64, f64) {
    let w = dsp::window(kind, n);
    let sum = w.iter().sum::<f64>();
    let energy = w.iter().map(|v| v * v).sum::<f64>();
    (w, sum, energy)
}

/// Hann-windowed averaged periodogram with density scaling.
pub fn power_spectrum<T: Sample>(
    frames: &FrameCube<T>,
    window: WindowKind,
    nfft: usize,
    n_avg: usize,
) -> Result<PowerSpectrum> {
    power_spectrum_with(frames, window, nfft, n_avg, Scaling::Density)
}

/// Averaged periodogram of the first `n_avg` chirps, zero padded to `nfft`.
/// Real frames give a one-sided spectrum on `[0, rate/2]`; complex frames a
/// two-sided one on `[−rate/2, rate/2)`.
pub fn power_spectrum_with<T: Sample>(
    frames: &FrameCube<T>,
    window: WindowKind,
    nfft: usize,
    n_avg: usize,
    scaling: Scaling,
) -> Result<PowerSpectrum> {
    if frames.is_empty() {
        return Err(Error::EmptyFrame);
    }
    if n_avg == 0 || n_avg > frames.chirps() {
        return Err(Error::TooFewChirps {
            requested: n_avg,
            available: frames.chirps(),
        });
    }
    if nfft < frames.samples() {
        return Err(Error::DimensionMismatch {
            expected: format!("nfft >= {}", frames.samples()),
            got: nfft.to_string(),
        });
    }
    let rate = frames.rate;
    let (w, sum, energy) = scaled_window(window, frames.samples());
    let norm = match scaling {
        Scaling::Density => 1.0 / (rate * energy),
        Scaling::Power => 1.0 / (sum * sum),
    };
    let rows: Vec<Vec<f64>> = (0..n_avg)
        .into_par_iter()
        .map(|m| {
            dsp::spectrum(frames.chirp(m), nfft, Some(&w))
                .into_iter()
                .map(|z| z.norm_sqr())
                .collect()
        })
        .collect();
    // summed in chirp order so results do not depend on scheduling
    let mut acc = vec![0.0; nfft];
    for row in rows {
        acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
    }
    let avg = |k: usize| acc[k] * norm / n_avg as f64;
    let df = rate / nfft as f64;
    let (power, freq): (Vec<f64>, Vec<f64>) = if T::IS_COMPLEX {
        let half = nfft / 2;
        (0..nfft)
            .map(|i| {
                let k = (i + nfft - half) % nfft;
                (avg(k), (i as f64 - half as f64) * df)
            })
            .unzip()
    } else {
        (0..=nfft / 2)
            .map(|k| {
                let edge = k == 0 || 2 * k == nfft;
                (if edge { avg(k) } else { 2.0 * avg(k) }, k as f64 * df)
            })
            .unzip()
    };
    let range_m = freq.iter().map(|f| f * frames.meta.range_per_hz).collect();
    let mut out = PowerSpectrum {
        power_db: power.into_iter().map(dsp::db).collect(),
        freq_hz: freq,
        range_m,
        n_averaged: n_avg,
        window,
        scaling,
        nfft,
        floor_estimate: f64::NAN,
    };
    out.floor_estimate = out.default_floor();
    Ok(out)
}

/// Local maxima of `values[band]` more than `threshold` dB above `reference`.
fn peaks_1d(values: &[f64], band: Range<usize>, reference: f64, threshold: f64) -> Vec<usize> {
    band.clone()
        .filter(|&k| {
            let v = values[k];
            let left = k == 0 || values[k - 1] < v;
            let right = k + 1 >= values.len() || values[k + 1] <= v;
            left && right && v > reference + threshold
        })
        .collect()
}

/// Median power over `band` (Hz), excluding `±guard_bins` around every local
/// maximum standing more than 10 dB above the band median.
pub fn noise_floor(
    spectrum: &PowerSpectrum,
    band: std::ops::RangeInclusive<f64>,
    guard_bins: usize,
) -> Result<f64> {
    let bins = spectrum.band_bins(*band.start(), *band.end());
    if bins.is_empty() {
        return Err(Error::BandEmpty);
    }
    floor_of_bins(&spectrum.power_db, bins, guard_bins)
}

fn floor_of_bins(values: &[f64], bins: Range<usize>, guard_bins: usize) -> Result<f64> {
    let mut all: Vec<f64> = values[bins.clone()].to_vec();
    let reference = dsp::median(&mut all).ok_or(Error::BandEmpty)?;
    let mut keep = vec![true; values.len()];
    for p in peaks_1d(values, bins.clone(), reference, PEAK_THRESHOLD_DB) {
        let lo = p.saturating_sub(guard_bins);
        let hi = (p + guard_bins + 1).min(values.len());
        keep[lo..hi].iter_mut().for_each(|k| *k = false);
    }
    let mut rest: Vec<f64> = bins.filter(|&k| keep[k]).map(|k| values[k]).collect();
    dsp::median(&mut rest).ok_or(Error::BandEmpty)
}

/// Default smoothing width: 1% of the bins, at least one.
pub fn default_smoothing(bins: usize) -> usize {
    (bins / 100).max(1)
}

/// Per-bin `before − after` in dB, smoothed by a centred moving average.
pub fn improvement_curve(
    before: &PowerSpectrum,
    after: &PowerSpectrum,
    smooth_window: usize,
) -> Result<Vec<f64>> {
    if before.len() != after.len()
        || before
            .freq_hz
            .iter()
            .zip(&after.freq_hz)
            .any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
    {
        return Err(Error::AxisMismatch);
    }
    let diff: Vec<f64> = before
        .power_db
        .iter()
        .zip(&after.power_db)
        .map(|(b, a)| b - a)
        .collect();
    Ok(dsp::moving_average(&diff, smooth_window))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPeak {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub power_db: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    /// `power_db[range_bin][doppler_bin]`.
    pub power_db: Vec<Vec<f64>>,
    pub range_m: Vec<f64>,
    pub velocity_mps: Vec<f64>,
    pub floor_db: f64,
    /// Strongest local maxima, descending power.
    pub peaks: Vec<MapPeak>,
}

impl RangeDopplerMap {
    pub fn range_bins(&self) -> usize {
        self.range_m.len()
    }

    pub fn doppler_bins(&self) -> usize {
        self.velocity_mps.len()
    }

    pub fn velocity_resolution(&self) -> f64 {
        if self.velocity_mps.len() > 1 {
            self.velocity_mps[1] - self.velocity_mps[0]
        } else {
            0.0
        }
    }

    pub fn range_resolution(&self) -> f64 {
        if self.range_m.len() > 1 {
            (self.range_m[1] - self.range_m[0]).abs()
        } else {
            0.0
        }
    }

    /// Copy keeping only the range bins in `[lo, hi]` metres. Floor and peaks
    /// are those of the full map.
    pub fn restricted_range(&self, lo: f64, hi: f64) -> Self {
        let keep: Vec<usize> = (0..self.range_bins())
            .filter(|&r| (lo..=hi).contains(&self.range_m[r]))
            .collect();
        Self {
            power_db: keep.iter().map(|&r| self.power_db[r].clone()).collect(),
            range_m: keep.iter().map(|&r| self.range_m[r]).collect(),
            velocity_mps: self.velocity_mps.clone(),
            floor_db: self.floor_db,
            peaks: self
                .peaks
                .iter()
                .filter(|p| (lo..=hi).contains(&p.range_m))
                .copied()
                .collect(),
        }
    }

    /// Cell with the highest power.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (r, row) in self.power_db.iter().enumerate() {
            for (d, &v) in row.iter().enumerate() {
                if v > best.2 {
                    best = (r, d, v);
                }
            }
        }
        (best.0, best.1)
    }

    pub fn nearest_cell(&self, range: f64, velocity: f64) -> (usize, usize) {
        let near = |axis: &[f64], x: f64| {
            axis.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        (
            near(&self.range_m, range),
            near(&self.velocity_mps, velocity),
        )
    }
}

/// Guard half-width around 2-D peaks when estimating the map floor.
pub const MAP_GUARD: usize = 3;
const MAX_REPORTED_PEAKS: usize = 64;

fn shift_index(i: usize, n: usize) -> usize {
    (i + n - n / 2) % n
}

/// Windowed fast-time FFT per chirp, then windowed slow-time FFT per range
/// bin, Doppler axis centred. Real frames keep the non-negative range bins.
pub fn range_doppler_map<T: Sample>(
    frames: &FrameCube<T>,
    window: WindowKind,
) -> Result<RangeDopplerMap> {
    if frames.is_empty() {
        return Err(Error::EmptyFrame);
    }
    let chirps = frames.chirps();
    if chirps < 2 {
        return Err(Error::TooFewChirps {
            requested: 2,
            available: chirps,
        });
    }
    let n = frames.samples();
    let (wf, sum_f, _) = scaled_window(window, n);
    let (ws, sum_s, _) = scaled_window(window, chirps);
    let fast: Vec<Vec<Complex64>> = (0..chirps)
        .into_par_iter()
        .map(|m| dsp::spectrum(frames.chirp(m), n, Some(&wf)))
        .collect();
    let range_bins: Vec<usize> = if T::IS_COMPLEX {
        (0..n).map(|i| shift_index(i, n)).collect()
    } else {
        (0..=n / 2).collect()
    };
    let norm = 1.0 / (sum_f * sum_f * sum_s * sum_s);
    let power_db: Vec<Vec<f64>> = range_bins
        .par_iter()
        .map(|&k| {
            let slow: Vec<Complex64> = fast.iter().map(|row| row[k]).collect();
            let spec = dsp::spectrum(&slow, chirps, Some(&ws));
            (0..chirps)
                .map(|i| dsp::db(spec[shift_index(i, chirps)].norm_sqr() * norm))
                .collect()
        })
        .collect();

    let df = frames.rate / n as f64;
    let range_m = range_bins
        .iter()
        .map(|&k| {
            let signed = if T::IS_COMPLEX && 2 * k >= n {
                k as f64 - n as f64
            } else {
                k as f64
            };
            signed * df * frames.meta.range_per_hz
        })
        .collect();
    let period = frames.meta.sweep_period;
    let lambda = frames.meta.wavelength;
    let velocity_mps = (0..chirps)
        .map(|i| {
            let fd = (i as f64 - (chirps / 2) as f64) / (chirps as f64 * period);
            fd * lambda / 2.0
        })
        .collect();
    let mut map = RangeDopplerMap {
        power_db,
        range_m,
        velocity_mps,
        floor_db: f64::NAN,
        peaks: Vec::new(),
    };
    annotate_map(&mut map, PEAK_THRESHOLD_DB);
    Ok(map)
}

fn map_local_maxima(map: &RangeDopplerMap, reference: f64, threshold: f64) -> Vec<(usize, usize)> {
    let (nr, nd) = (map.range_bins(), map.doppler_bins());
    let mut out = Vec::new();
    for r in 0..nr {
        for d in 0..nd {
            let v = map.power_db[r][d];
            if v <= reference + threshold {
                continue;
            }
            let mut is_max = true;
            'n: for dr in -1i64..=1 {
                for dd in -1i64..=1 {
                    if dr == 0 && dd == 0 {
                        continue;
                    }
                    let rr = r as i64 + dr;
                    if rr < 0 || rr >= nr as i64 {
                        continue;
                    }
                    let dd = (d as i64 + dd).rem_euclid(nd as i64) as usize;
                    let u = map.power_db[rr as usize][dd];
                    if u > v || (u == v && (rr as usize, dd) < (r, d)) {
                        is_max = false;
                        break 'n;
                    }
                }
            }
            if is_max {
                out.push((r, d));
            }
        }
    }
    out
}

/// Median of the map excluding `±MAP_GUARD` cells around every local maximum
/// `threshold` dB above the overall median; then the strongest maxima are
/// reported against that floor.
pub fn annotate_map(map: &mut RangeDopplerMap, threshold: f64) {
    let mut all: Vec<f64> = map.power_db.iter().flatten().copied().collect();
    let reference = dsp::median(&mut all).unwrap_or(f64::NAN);
    let maxima = map_local_maxima(map, reference, threshold);
    let (nr, nd) = (map.range_bins(), map.doppler_bins());
    let mut keep = vec![vec![true; nd]; nr];
    for &(r, d) in &maxima {
        for rr in r.saturating_sub(MAP_GUARD)..(r + MAP_GUARD + 1).min(nr) {
            for k in 0..=2 * MAP_GUARD {
                let dd = (d as i64 + k as i64 - MAP_GUARD as i64).rem_euclid(nd as i64) as usize;
                keep[rr][dd] = false;
            }
        }
    }
    let mut rest: Vec<f64> = (0..nr)
        .flat_map(|r| (0..nd).map(move |d| (r, d)))
        .filter(|&(r, d)| keep[r][d])
        .map(|(r, d)| map.power_db[r][d])
        .collect();
    map.floor_db = dsp::median(&mut rest).unwrap_or(reference);
    let mut peaks: Vec<MapPeak> = maxima
        .into_iter()
        .map(|(r, d)| MapPeak {
            range_m: map.range_m[r],
            velocity_mps: map.velocity_mps[d],
            power_db: map.power_db[r][d],
            snr_db: map.power_db[r][d] - map.floor_db,
        })
        .collect();
    peaks.sort_by(|a, b| b.power_db.total_cmp(&a.power_db));
    peaks.truncate(MAX_REPORTED_PEAKS);
    map.peaks = peaks;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrMeasurement {
    pub snr_db: f64,
    pub peak_db: f64,
    pub floor_db: f64,
    pub range_m: f64,
    pub velocity_mps: f64,
}

/// Truth window half-width, bins.
pub const SNR_WINDOW: usize = 2;
/// Half-width of the neighbourhood used for a spectrum's local floor, bins.
pub const SNR_FLOOR_SPAN: usize = 64;
const SNR_MIN_EXCESS_DB: f64 = 3.0;

/// SNR of the target line in a spectrum whose range axis is populated.
/// The floor is the median of the surrounding `±SNR_FLOOR_SPAN` bins with
/// peaks guarded.
pub fn measure_snr_spectrum(
    spectrum: &PowerSpectrum,
    truth: &TargetSpec,
) -> Result<SnrMeasurement> {
    let k = nearest(&spectrum.range_m, truth.range);
    let n = spectrum.len();
    let lo = k.saturating_sub(SNR_FLOOR_SPAN);
    let hi = (k + SNR_FLOOR_SPAN + 1).min(n);
    let floor = floor_of_bins(&spectrum.power_db, lo..hi, DEFAULT_GUARD_BINS)?;
    let values = &spectrum.power_db;
    let best = (k.saturating_sub(SNR_WINDOW)..(k + SNR_WINDOW + 1).min(n))
        .filter(|&i| {
            let v = values[i];
            (i == 0 || values[i - 1] <= v) && (i + 1 >= n || values[i + 1] <= v)
        })
        .max_by(|&a, &b| values[a].total_cmp(&values[b]));
    match best {
        Some(i) if values[i] > floor + SNR_MIN_EXCESS_DB => Ok(SnrMeasurement {
            snr_db: values[i] - floor,
            peak_db: values[i],
            floor_db: floor,
            range_m: spectrum.range_m[i],
            velocity_mps: 0.0,
        }),
        _ => Err(Error::PeakNotFound),
    }
}

/// 2-D SNR of the target in a range-Doppler map against the map floor.
pub fn measure_snr_map(map: &RangeDopplerMap, truth: &TargetSpec) -> Result<SnrMeasurement> {
    let (r0, d0) = map.nearest_cell(truth.range, truth.velocity);
    let (nr, nd) = (map.range_bins(), map.doppler_bins());
    let w = SNR_WINDOW as i64;
    let mut best: Option<(usize, usize)> = None;
    for dr in -w..=w {
        let r = r0 as i64 + dr;
        if r < 0 || r >= nr as i64 {
            continue;
        }
        for dd in -w..=w {
            let d = (d0 as i64 + dd).rem_euclid(nd as i64) as usize;
            let r = r as usize;
            let v = map.power_db[r][d];
            if best.is_none_or(|(br, bd)| v > map.power_db[br][bd]) {
                best = Some((r, d));
            }
        }
    }
    let (r, d) = best.ok_or(Error::PeakNotFound)?;
    let peak = map.power_db[r][d];
    let local_max = map_local_maxima_at(map, r, d);
    if !local_max || peak <= map.floor_db + SNR_MIN_EXCESS_DB {
        return Err(Error::PeakNotFound);
    }
    Ok(SnrMeasurement {
        snr_db: peak - map.floor_db,
        peak_db: peak,
        floor_db: map.floor_db,
        range_m: map.range_m[r],
        velocity_mps: map.velocity_mps[d],
    })
}

fn map_local_maxima_at(map: &RangeDopplerMap, r: usize, d: usize) -> bool {
    let (nr, nd) = (map.range_bins(), map.doppler_bins());
    let v = map.power_db[r][d];
    for dr in -1i64..=1 {
        for dd in -1i64..=1 {
            let rr = r as i64 + dr;
            if rr < 0 || rr >= nr as i64 {
                continue;
            }
            let dd = (d as i64 + dd).rem_euclid(nd as i64) as usize;
            if map.power_db[rr as usize][dd] > v {
                return false;
            }
        }
    }
    true
}

fn nearest(axis: &[f64], x: f64) -> usize {
    axis.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

pub fn write_spectrum_csv(spectrum: &PowerSpectrum, mut out: impl Write) -> Result<()> {
    writeln!(out, "freq_hz,range_m,power_db")?;
    for i in 0..spectrum.len() {
        writeln!(
            out,
            "{},{},{}",
            spectrum.freq_hz[i], spectrum.range_m[i], spectrum.power_db[i]
        )?;
    }
    Ok(())
}

pub fn write_map_csv(map: &RangeDopplerMap, mut out: impl Write) -> Result<()> {
    writeln!(out, "range_m,velocity_mps,power_db")?;
    for (r, row) in map.power_db.iter().enumerate() {
        for (d, v) in row.iter().enumerate() {
            writeln!(out, "{},{},{}", map.range_m[r], map.velocity_mps[d], v)?;
        }
    }
    Ok(())
}

pub fn write_curve_csv(axis: &PowerSpectrum, curve: &[f64], mut out: impl Write) -> Result<()> {
    if curve.len() != axis.len() {
        return Err(Error::AxisMismatch);
    }
    writeln!(out, "freq_hz,range_m,improvement_db")?;
    for (i, c) in curve.iter().enumerate() {
        writeln!(out, "{},{},{}", axis.freq_hz[i], axis.range_m[i], c)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{FrameMeta, RealCube};
    use crate::model::{PhaseNoiseSpec, RadarScenario};
    use crate::spc;
    use crate::synth;
    use crate::testkit::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    use std::f64::consts::TAU;

    fn tone(n: usize, chirps: usize, k: f64, amp: f64) -> RealCube {
        FrameCube::from_fn(n, chirps, n as f64, FrameMeta::default(), |i, _| {
            amp * (TAU * k * i as f64 / n as f64).cos()
        })
    }

    fn noise(n: usize, chirps: usize, sigma: f64, seed: u64) -> RealCube {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        FrameCube::from_fn(n, chirps, 1e6, FrameMeta::default(), |_, _| {
            sigma * rng.sample::<f64, _>(StandardNormal)
        })
    }

    #[test]
    fn exact_bin_tone_power() {
        let s = power_spectrum_with(
            &tone(64, 1, 5.0, 1.0),
            WindowKind::Rectangular,
            64,
            1,
            Scaling::Power,
        )
        .unwrap();
        assert!((s.power_db[5] - dsp::db(0.5)).abs() < 1e-12);
        assert!(s
            .power_db
            .iter()
            .enumerate()
            .all(|(k, &p)| k == 5 || p < -250.0));
    }

    #[test]
    fn hann_neighbours() {
        let s = power_spectrum_with(
            &tone(64, 1, 5.0, 1.0),
            WindowKind::Hann,
            64,
            1,
            Scaling::Power,
        )
        .unwrap();
        assert!((s.power_db[5] - dsp::db(0.5)).abs() < 1e-12);
        assert!((s.power_db[4] - s.power_db[5] + 6.0206).abs() < 1e-3);
        assert!((s.power_db[6] - s.power_db[5] + 6.0206).abs() < 1e-3);
        assert!(s.power_db[3] < -250.0);
    }

    #[test]
    fn parseval() {
        let x = noise(256, 1, 0.3, 1);
        let s = power_spectrum(&x, WindowKind::Rectangular, 256, 1).unwrap();
        let df = s.bin_width();
        let total: f64 = s.power_db.iter().map(|p| 10f64.powf(p / 10.0) * df).sum();
        let energy = x.as_slice().iter().map(|v| v * v).sum::<f64>() / 256.0;
        assert!((total / energy - 1.0).abs() < 1e-9);
    }

    #[test]
    fn averaging_shrinks_spread() {
        let spread = |n_avg: usize| {
            let s = power_spectrum(&noise(512, 100, 1.0, 2), WindowKind::Hann, 512, n_avg).unwrap();
            let lin: Vec<f64> = s.power_db[10..240]
                .iter()
                .map(|p| 10f64.powf(p / 10.0))
                .collect();
            let mean = lin.iter().sum::<f64>() / lin.len() as f64;
            (lin.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / lin.len() as f64).sqrt() / mean
        };
        let ratio = spread(1) / spread(100);
        assert!((7.0..14.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn too_many_averages() {
        assert!(matches!(
            power_spectrum(&tone(16, 2, 1.0, 1.0), WindowKind::Hann, 16, 3),
            Err(Error::TooFewChirps { .. })
        ));
    }

    #[test]
    fn floor_of_constructed_spectrum() {
        let mut p = vec![-100.0; 200];
        p[80] = -70.0;
        let f: Vec<f64> = (0..200).map(|k| k as f64).collect();
        let s = PowerSpectrum::from_parts(p, f, 1.0).unwrap();
        assert!((noise_floor(&s, 0.0..=199.0, 5).unwrap() + 100.0).abs() < 0.5);
        assert!(matches!(
            noise_floor(&s, 80.2..=80.8, 5),
            Err(Error::BandEmpty)
        ));
        let mut q = vec![-100.0; 9];
        q[4] = -50.0;
        let s = PowerSpectrum::from_parts(q, (0..9).map(|k| k as f64).collect(), 1.0).unwrap();
        assert!(matches!(
            noise_floor(&s, 0.0..=8.0, 5),
            Err(Error::BandEmpty)
        ));
    }

    #[test]
    fn white_noise_floor_level() {
        let sigma = 0.01;
        let x = noise(1024, 100, sigma, 3);
        let s = power_spectrum(&x, WindowKind::Hann, 1024, 100).unwrap();
        let expect = dsp::db(2.0 * sigma * sigma / x.rate);
        assert!((s.floor_estimate - expect).abs() < 1.0);
    }

    #[test]
    fn floor_scale_equivariance() {
        let mut x = noise(256, 8, 1.0, 4);
        let a = power_spectrum(&x, WindowKind::Hann, 256, 8)
            .unwrap()
            .floor_estimate;
        x.scale(0.01);
        let b = power_spectrum(&x, WindowKind::Hann, 256, 8)
            .unwrap()
            .floor_estimate;
        assert!((a - b - 40.0).abs() < 1e-9);
    }

    #[test]
    fn improvement_examples() {
        let x = noise(128, 4, 1.0, 5);
        let s = power_spectrum(&x, WindowKind::Hann, 128, 4).unwrap();
        assert!(improvement_curve(&s, &s, 3)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let mut lifted = s.clone();
        lifted.power_db.iter_mut().for_each(|p| *p += 3.0);
        assert!(improvement_curve(&lifted, &s, 5)
            .unwrap()
            .iter()
            .all(|v| (v - 3.0).abs() < 1e-9));
        let short = power_spectrum(&x, WindowKind::Hann, 256, 4).unwrap();
        assert!(matches!(
            improvement_curve(&s, &short, 1),
            Err(Error::AxisMismatch)
        ));
        assert_eq!(default_smoothing(4097), 40);
    }

    fn moving_target_scenario() -> RadarScenario {
        let mut s = small_homodyne();
        s.sweep.chirps = 64;
        s.leakage.amplitude = 1e-6;
        // without processing the target line sits at f_beat,leakage + f_beat,target
        s.leakage.f_beat = 0.0;
        s.targets
            .push(TargetSpec::point(0.1, range_for_bins(&s, 30.0), 5.0));
        s
    }

    #[test]
    fn map_axes_and_target() {
        let s = moving_target_scenario();
        let z = synth::synth_balanced_frames(&s).unwrap();
        let map = range_doppler_map(&z, WindowKind::Hann).unwrap();
        let lambda = s.sweep.wavelength();
        let vmax = lambda / (4.0 * s.sweep.sweep_period);
        assert_eq!(map.doppler_bins(), 64);
        assert!((map.velocity_mps[0] + vmax).abs() < 1e-9 * vmax);
        let last = map.velocity_mps[63] + map.velocity_resolution();
        assert!((last - vmax).abs() < 1e-9 * vmax);
        let top = map.peaks[0];
        let t = &s.targets[0];
        assert!((top.range_m - t.range).abs() <= map.range_resolution());
        assert!((top.velocity_mps - t.velocity).abs() <= map.velocity_resolution());
        assert!(measure_snr_map(&map, t).unwrap().snr_db > 100.0);
    }

    #[test]
    fn map_is_separable() {
        let mut s = moving_target_scenario();
        s.sweep.chirps = 8;
        s.thermal_noise_db_hz = Some(-100.0);
        let z = synth::synth_balanced_frames(&s).unwrap();
        let map = range_doppler_map(&z, WindowKind::Hann).unwrap();
        let (n, m) = (z.samples(), z.chirps());
        let wf = dsp::window(WindowKind::Hann, n);
        let ws = dsp::window(WindowKind::Hann, m);
        let fast: Vec<Vec<Complex64>> = z.rows().map(|r| dsp::spectrum(r, n, Some(&wf))).collect();
        let norm = 1.0 / (wf.iter().sum::<f64>().powi(2) * ws.iter().sum::<f64>().powi(2));
        for i in [0, 17, n / 2, n - 1] {
            let k = (i + n - n / 2) % n;
            let slow: Vec<Complex64> = fast.iter().map(|r| r[k]).collect();
            let spec = dsp::spectrum(&slow, m, Some(&ws));
            for j in 0..m {
                let expect = dsp::db(spec[(j + m - m / 2) % m].norm_sqr() * norm);
                assert_eq!(map.power_db[i][j], expect);
            }
        }
    }

    #[test]
    fn leakage_sits_at_origin_after_processing() {
        let mut s = small_heterodyne();
        s.sweep.chirps = 16;
        s.thermal_noise_db_hz = Some(-120.0);
        let x = synth::synth_spc_frames(&s).unwrap();
        let y = spc::run_spc(&x, s.processing.nfft_estimation).unwrap();
        let map = range_doppler_map(&y, WindowKind::Hann).unwrap();
        let (r, d) = map.argmax();
        assert_eq!(r, 0);
        assert_eq!(map.velocity_mps[d], 0.0);
    }

    #[test]
    fn offset_shifts_doppler_without_technique() {
        let mut s = small_heterodyne();
        s.sweep.chirps = 8;
        s.leakage.amplitude = 1e-6;
        s.leakage.f_beat = 0.0;
        s.targets
            .push(TargetSpec::point(0.1, range_for_bins(&s, 30.0), 0.0));
        let doppler_bin = 1.0 / (8.0 * s.sweep.sweep_period);
        s.defects.f_offset = 2.0 * doppler_bin;
        let x = synth::synth_spc_frames(&s).unwrap();
        let y = spc::mix_with_lo(&x, s.sampling.if_carrier);
        let map = range_doppler_map(&y, WindowKind::Hann).unwrap();
        let m = measure_snr_map(&map, &TargetSpec::point(0.1, s.targets[0].range, 0.0));
        // truth window is ±2 bins: the line sits exactly two bins away
        let hit = m.unwrap();
        assert!((hit.velocity_mps - 2.0 * map.velocity_resolution()).abs() < 1e-9);
    }

    #[test]
    fn snr_of_constructed_map() {
        let mut map = RangeDopplerMap {
            power_db: vec![vec![-120.0; 16]; 16],
            range_m: (0..16).map(|k| k as f64).collect(),
            velocity_mps: (0..16).map(|k| k as f64 - 8.0).collect(),
            floor_db: f64::NAN,
            peaks: Vec::new(),
        };
        annotate_map(&mut map, PEAK_THRESHOLD_DB);
        let t = TargetSpec::point(1.0, 5.0, 1.0);
        assert!(matches!(
            measure_snr_map(&map, &t),
            Err(Error::PeakNotFound)
        ));
        map.power_db[5][9] = -90.0;
        annotate_map(&mut map, PEAK_THRESHOLD_DB);
        assert!((measure_snr_map(&map, &t).unwrap().snr_db - 30.0).abs() < 1.0);
        assert_eq!(map.peaks.len(), 1);
    }

    #[test]
    fn snr_of_spectrum_line() {
        let mut p = vec![-100.0; 300];
        p[150] = -70.0;
        let s = PowerSpectrum::from_parts(p, (0..300).map(|k| k as f64).collect(), 2.0).unwrap();
        let t = TargetSpec::point(1.0, 301.0, 0.0);
        assert!((measure_snr_spectrum(&s, &t).unwrap().snr_db - 30.0).abs() < 1.0);
        let absent = TargetSpec::point(1.0, 100.0, 0.0);
        assert!(matches!(
            measure_snr_spectrum(&s, &absent),
            Err(Error::PeakNotFound)
        ));
    }

    #[test]
    fn csv_headers() {
        let s = power_spectrum(&tone(16, 1, 2.0, 1.0), WindowKind::Hann, 16, 1).unwrap();
        let mut buf = Vec::new();
        write_spectrum_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("freq_hz,range_m,power_db\n"));
        assert_eq!(text.lines().count(), 1 + 9);
        let mut buf = Vec::new();
        write_curve_csv(&s, &vec![0.0; s.len()], &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("freq_hz,range_m,improvement_db\n"));
    }

    #[test]
    fn spectrum_of_processed_phase_noise_has_a_floor() {
        let mut s = small_heterodyne();
        s.leakage.phase_noise = PhaseNoiseSpec::flat(-110.0);
        let x = synth::synth_spc_frames(&s).unwrap();
        let sp = power_spectrum(&x, WindowKind::Hann, 4096, 8).unwrap();
        assert!(sp.floor_estimate.is_finite());
        assert!(sp.range_m[10] > 0.0);
    }

    #[test]
    fn restriction_keeps_axes_aligned() {
        let s = power_spectrum(&tone(64, 1, 5.0, 1.0), WindowKind::Hann, 64, 1).unwrap();
        let r = s.restricted(4.0, 10.0).unwrap();
        assert_eq!(r.freq_hz, s.freq_hz[4..=10]);
        assert_eq!(r.power_db, s.power_db[4..=10]);
        assert!(matches!(s.restricted(100.0, 200.0), Err(Error::BandEmpty)));

        let x = tone(16, 4, 2.0, 1.0);
        let map = range_doppler_map(&x, WindowKind::Hann).unwrap();
        let part = map.restricted_range(1.0, 3.0);
        assert_eq!(part.range_m, vec![1.0, 2.0, 3.0]);
        assert_eq!(part.power_db[1], map.power_db[2]);
        assert_eq!(part.floor_db, map.floor_db);
    }
}
