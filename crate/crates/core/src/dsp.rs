//! FFT and window helpers shared by the estimators and the spectra.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::frame::Sample;
use crate::model::WindowKind;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Periodic (DFT-even) window of length `n`.
pub fn window(kind: WindowKind, n: usize) -> Vec<f64> {
    match kind {
        WindowKind::Rectangular => vec![1.0; n],
        WindowKind::Hann => (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect(),
    }
}

/// Unnormalized `nfft`-point DFT of `row` (optionally windowed), zero padded
/// when `nfft > row.len()`. Rows longer than `nfft` are truncated.
pub fn spectrum<T: Sample>(row: &[T], nfft: usize, window: Option<&[f64]>) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let used = row.len().min(nfft);
    match window {
        Some(w) => {
            for ((dst, &x), &wv) in buf.iter_mut().zip(&row[..used]).zip(w) {
                *dst = x.to_complex() * wv;
            }
        }
        None => {
            for (dst, &x) in buf.iter_mut().zip(&row[..used]) {
                *dst = x.to_complex();
            }
        }
    }
    forward_plan(nfft).process(&mut buf);
    buf
}

/// Index of the largest value in `values[range]`; ties resolve to the lowest
/// index.
pub fn argmax_in(values: &[f64], range: std::ops::Range<usize>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for k in range {
        let v = values[k];
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k)
}

pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let y = (x + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if y <= -std::f64::consts::PI {
        y + two_pi
    } else {
        y
    }
}

pub fn db(p: f64) -> f64 {
    10.0 * p.log10()
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let (lower, &mut upper, _) = values.select_nth_unstable_by(n / 2, |a, b| a.total_cmp(b));
    Some(if n % 2 == 1 {
        upper
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + upper)
    })
}

/// Centered moving average; the window shrinks at the edges.
pub fn moving_average(values: &[f64], width: usize) -> Vec<f64> {
    let width = width.max(1);
    let half_lo = (width - 1) / 2;
    let half_hi = width / 2;
    let mut prefix = Vec::with_capacity(values.len() + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half_lo);
            let hi = (i + half_hi + 1).min(values.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}
