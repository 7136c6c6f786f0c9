//! Beat-signal synthesis for the real oversampled path, the quadrature
//! heterodyne path (with imbalance), the balanced complex reference, and the
//! homodyne baseband path.
//!
//! All randomness (per-chirp frequency draws, phase-noise rows, thermal noise)
//! is drawn up front from the scenario seed, each process on its own RNG
//! stream. Chirps are then filled in parallel; the result does not depend on
//! scheduling.
//!
//! Every path is built from the same analytic row
//! `z[n] = Σ A·exp(j·arg[n])` over the leakage and the targets:
//! the real frame and the I channel are `Re z`, the Q channel is
//! `A_E·Im(z·exp(jθ_E))`, and the balanced reference is `z` itself.

mod phase_noise;

pub use phase_noise::{expected_variance, synth_phase_noise, PhaseNoiseRealization};

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{ComplexCube, FrameCube, FrameMeta, IqFrames, RealCube};
use crate::model::{stream, stream_rng, Architecture, ChirpDraws, RadarScenario, ValidationReport};

/// Ground truth recorded while synthesizing, for oracles and reports.
#[derive(Debug, Clone)]
pub struct TruthLedger {
    pub draws: ChirpDraws,
    /// Per-chirp leakage beat frequency in the sampled signal, Hz.
    pub leakage_frequency: Vec<f64>,
    /// Per-chirp leakage phase at the first kept sample (noise free), wrapped.
    pub leakage_phase: Vec<f64>,
    /// Leakage phase noise over the kept samples.
    pub leakage_phase_noise: PhaseNoiseRealization,
    /// Per-target beat frequency, Hz.
    pub target_beats: Vec<f64>,
    /// Per-target Doppler frequency, Hz.
    pub target_dopplers: Vec<f64>,
}

/// Frames plus the truth they were generated from.
#[derive(Debug, Clone)]
pub struct Synthesis<F> {
    pub frames: F,
    pub truth: TruthLedger,
}

pub fn frame_meta(s: &RadarScenario, path: &str) -> FrameMeta {
    FrameMeta {
        scenario_hash: s.hash(),
        path: path.to_string(),
        range_per_hz: s.sweep.range_per_hz(),
        wavelength: s.sweep.wavelength(),
        sweep_period: s.sweep.sweep_period,
    }
}

fn invalid(rule: &'static str, detail: &str) -> Error {
    let mut report = ValidationReport::default();
    report.violations.push(crate::model::Violation {
        rule,
        detail: detail.to_string(),
    });
    Error::InvalidScenario(report)
}

fn frac_cycles(cycles: f64) -> f64 {
    TAU * cycles.rem_euclid(1.0)
}

struct Component {
    amplitude: f64,
    /// Fast-time frequency per chirp, Hz.
    freq: Vec<f64>,
    /// Phase at t = 0 (start of the chirp) per chirp, radians.
    phase0: Vec<f64>,
    /// Phase noise over kept samples, per chirp.
    noise: PhaseNoiseRealization,
}

struct Plan {
    rate: f64,
    kept: usize,
    discard: usize,
    chirps: usize,
    components: Vec<Component>,
    noise_i: Vec<f64>,
    noise_q: Vec<f64>,
    truth: TruthLedger,
}

/// Full-length leakage phase noise (every sample of every chirp, including
/// the discarded head) on the scenario's own stream.
pub fn leakage_phase_noise(s: &RadarScenario) -> Result<PhaseNoiseRealization> {
    s.ensure_valid()?;
    phase_noise::realize(
        &s.leakage.phase_noise,
        s.sweep.samples_per_chirp,
        s.sweep.chirps,
        s.rate(),
        &mut stream_rng(s.defects.seed, stream::LEAKAGE_PHASE_NOISE),
    )
}

fn build_plan(s: &RadarScenario, leak_override: Option<&PhaseNoiseRealization>) -> Result<Plan> {
    s.ensure_valid()?;
    let sw = &s.sweep;
    let rate = s.rate();
    let chirps = sw.chirps;
    let kept = sw.samples_kept;
    let discard = sw.discarded();
    let total = sw.samples_per_chirp;
    let period = sw.sweep_period;
    let seed = s.defects.seed;

    let draws = s.defects.draw(chirps);
    let (carrier, offset) = match s.architecture {
        Architecture::Heterodyne => (s.sampling.if_carrier, s.defects.f_offset),
        Architecture::Homodyne => (0.0, 0.0),
    };

    let keep_tail = |full: PhaseNoiseRealization| -> PhaseNoiseRealization {
        let samples: Vec<Vec<f64>> = full
            .samples
            .into_iter()
            .map(|row| row[discard..].to_vec())
            .collect();
        let n = (kept * chirps).max(1) as f64;
        let rms = (samples.iter().flatten().map(|v| v * v).sum::<f64>() / n).sqrt();
        PhaseNoiseRealization { samples, rms }
    };

    let leak_noise = match leak_override {
        Some(full) => {
            if full.samples.len() != chirps || full.samples.iter().any(|r| r.len() != total) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{chirps} rows of {total}"),
                    got: format!("{} rows", full.samples.len()),
                });
            }
            keep_tail(full.clone())
        }
        None => keep_tail(phase_noise::realize(
            &s.leakage.phase_noise,
            total,
            chirps,
            rate,
            &mut stream_rng(seed, stream::LEAKAGE_PHASE_NOISE),
        )?),
    };

    let leak_freq: Vec<f64> = (0..chirps)
        .map(|m| carrier + offset + draws.fast_time[m] + s.leakage.f_beat)
        .collect();
    // slow-time phase 2π(f_IF + f_offset + f_random,st)·T·m, reduced mod 2π
    let slow_phase: Vec<f64> = (0..chirps)
        .map(|m| frac_cycles((carrier + offset + draws.slow_time[m]) * period * m as f64))
        .collect();

    let mut components = Vec::with_capacity(1 + s.targets.len());
    components.push(Component {
        amplitude: s.leakage.amplitude,
        freq: leak_freq.clone(),
        phase0: slow_phase.iter().map(|p| p + s.leakage.theta).collect(),
        noise: leak_noise.clone(),
    });

    let mut target_beats = Vec::new();
    let mut target_dopplers = Vec::new();
    for (r, t) in s.targets.iter().enumerate() {
        let beat = sw.beat_frequency(t.range);
        let doppler = sw.doppler(t.velocity);
        target_beats.push(beat);
        target_dopplers.push(doppler);
        let noise = if t.correlated_with_leakage {
            leak_noise.clone()
        } else {
            keep_tail(phase_noise::realize(
                &t.phase_noise,
                total,
                chirps,
                rate,
                &mut stream_rng(seed, stream::TARGET_BASE + r as u64),
            )?)
        };
        components.push(Component {
            amplitude: t.amplitude,
            freq: leak_freq.iter().map(|f| f + beat).collect(),
            phase0: (0..chirps)
                .map(|m| slow_phase[m] + frac_cycles(doppler * period * m as f64) + t.theta)
                .collect(),
            noise,
        });
    }

    let (noise_i, noise_q) = match s.thermal_noise_db_hz {
        Some(n0) => {
            let sigma = (10f64.powf(n0 / 10.0) * rate / 2.0).sqrt();
            let draw = |id| {
                let mut rng = stream_rng(seed, id);
                (0..kept * chirps)
                    .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect::<Vec<f64>>()
            };
            (draw(stream::THERMAL_I), draw(stream::THERMAL_Q))
        }
        None => (Vec::new(), Vec::new()),
    };

    let leakage_phase = (0..chirps)
        .map(|m| {
            crate::dsp::wrap_phase(
                components[0].phase0[m] + frac_cycles(leak_freq[m] * discard as f64 / rate),
            )
        })
        .collect();

    Ok(Plan {
        rate,
        kept,
        discard,
        chirps,
        components,
        noise_i,
        noise_q,
        truth: TruthLedger {
            draws,
            leakage_frequency: leak_freq,
            leakage_phase,
            leakage_phase_noise: leak_noise,
            target_beats,
            target_dopplers,
        },
    })
}

impl Plan {
    /// Noise-free analytic row for chirp `m`.
    fn analytic_row(&self, m: usize, out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for c in &self.components {
            let f = c.freq[m];
            let p0 = c.phase0[m];
            let pn = c.noise.chirp(m);
            for (n, z) in out.iter_mut().enumerate() {
                let arg = frac_cycles(f * (self.discard + n) as f64 / self.rate) + p0 + pn[n];
                *z += Complex64::from_polar(c.amplitude, arg);
            }
        }
    }

    fn thermal(&self, m: usize, n: usize) -> (f64, f64) {
        if self.noise_i.is_empty() {
            (0.0, 0.0)
        } else {
            let idx = m * self.kept + n;
            (self.noise_i[idx], self.noise_q[idx])
        }
    }

    fn render(&self, mut emit: impl FnMut(usize, usize, Complex64, (f64, f64)) + Send) {
        // rows in parallel, then emitted in order
        let rows: Vec<Vec<Complex64>> = (0..self.chirps)
            .into_par_iter()
            .map(|m| {
                let mut row = vec![Complex64::new(0.0, 0.0); self.kept];
                self.analytic_row(m, &mut row);
                row
            })
            .collect();
        for (m, row) in rows.iter().enumerate() {
            for (n, &z) in row.iter().enumerate() {
                emit(n, m, z, self.thermal(m, n));
            }
        }
    }

    fn real(&self, meta: FrameMeta) -> RealCube {
        let mut data = Vec::with_capacity(self.kept * self.chirps);
        self.render(|_, _, z, (ni, _)| data.push(z.re + ni));
        FrameCube::from_vec(data, self.kept, self.chirps, self.rate, meta).expect("shape")
    }

    fn iq(&self, amp: f64, phase: f64, meta: FrameMeta) -> IqFrames {
        let mut i = Vec::with_capacity(self.kept * self.chirps);
        let mut q = Vec::with_capacity(self.kept * self.chirps);
        let rot = Complex64::new(phase.cos(), phase.sin());
        self.render(|_, _, z, (ni, nq)| {
            i.push(z.re + ni);
            q.push(amp * (z * rot).im + nq);
        });
        IqFrames {
            i: FrameCube::from_vec(
                i,
                self.kept,
                self.chirps,
                self.rate,
                meta.tagged(&format!("{}-i", meta.path)),
            )
            .expect("shape"),
            q: FrameCube::from_vec(
                q,
                self.kept,
                self.chirps,
                self.rate,
                meta.tagged(&format!("{}-q", meta.path)),
            )
            .expect("shape"),
        }
    }

    fn balanced(&self, meta: FrameMeta) -> ComplexCube {
        let mut data = Vec::with_capacity(self.kept * self.chirps);
        self.render(|_, _, z, (ni, nq)| data.push(Complex64::new(z.re + ni, z.im + nq)));
        FrameCube::from_vec(data, self.kept, self.chirps, self.rate, meta).expect("shape")
    }
}

/// Real oversampled heterodyne frame for the SPC pipeline.
pub fn synthesize_spc(s: &RadarScenario) -> Result<Synthesis<RealCube>> {
    if s.architecture != Architecture::Heterodyne {
        return Err(invalid(
            "spc requires heterodyne",
            "real IF path needs an IF stage",
        ));
    }
    if !s.sampling.satisfies_quarter_point() {
        return Err(invalid(
            "strategic frequency planning",
            "IF carrier must sit on Q·F_s·(4N+1)/4",
        ));
    }
    let plan = build_plan(s, None)?;
    let frames = plan.real(frame_meta(s, "spc-if"));
    Ok(Synthesis {
        frames,
        truth: plan.truth,
    })
}

pub fn synth_spc_frames(s: &RadarScenario) -> Result<RealCube> {
    synthesize_spc(s).map(|x| x.frames)
}

/// Quadrature heterodyne I/Q pair with the scenario's imbalance on Q.
pub fn synthesize_aspc_iq(s: &RadarScenario) -> Result<Synthesis<IqFrames>> {
    if s.architecture != Architecture::Heterodyne {
        return Err(invalid(
            "heterodyne required",
            "use the homodyne synthesizer",
        ));
    }
    let plan = build_plan(s, None)?;
    let frames = plan.iq(
        s.imbalance.amplitude,
        s.imbalance.phase,
        frame_meta(s, "aspc"),
    );
    Ok(Synthesis {
        frames,
        truth: plan.truth,
    })
}

/// Quadrature I/Q pair whose leakage phase noise is `leakage_noise` (full
/// length at this scenario's rate) instead of a fresh draw. Used to give a
/// quadrature twin the same oscillator noise as an oversampled scenario, via
/// [`PhaseNoiseRealization::decimated`].
pub fn synthesize_aspc_iq_shared(
    s: &RadarScenario,
    leakage_noise: &PhaseNoiseRealization,
) -> Result<Synthesis<IqFrames>> {
    if s.architecture != Architecture::Heterodyne {
        return Err(invalid(
            "heterodyne required",
            "use the homodyne synthesizer",
        ));
    }
    let plan = build_plan(s, Some(leakage_noise))?;
    let frames = plan.iq(
        s.imbalance.amplitude,
        s.imbalance.phase,
        frame_meta(s, "aspc"),
    );
    Ok(Synthesis {
        frames,
        truth: plan.truth,
    })
}

pub fn synth_aspc_iq_frames(s: &RadarScenario) -> Result<IqFrames> {
    synthesize_aspc_iq(s).map(|x| x.frames)
}

/// Balanced complex signal (no imbalance), any architecture. Shares every
/// random draw with the I/Q synthesizers for the same scenario.
pub fn synthesize_balanced(s: &RadarScenario) -> Result<Synthesis<ComplexCube>> {
    let plan = build_plan(s, None)?;
    let frames = plan.balanced(frame_meta(s, "balanced"));
    Ok(Synthesis {
        frames,
        truth: plan.truth,
    })
}

pub fn synth_balanced_frames(s: &RadarScenario) -> Result<ComplexCube> {
    synthesize_balanced(s).map(|x| x.frames)
}

/// Homodyne baseband I/Q pair.
pub fn synthesize_homodyne_iq(s: &RadarScenario) -> Result<Synthesis<IqFrames>> {
    if s.architecture != Architecture::Homodyne {
        return Err(invalid(
            "homodyne required",
            "use the heterodyne synthesizers",
        ));
    }
    let plan = build_plan(s, None)?;
    let frames = plan.iq(
        s.imbalance.amplitude,
        s.imbalance.phase,
        frame_meta(s, "bb"),
    );
    Ok(Synthesis {
        frames,
        truth: plan.truth,
    })
}

pub fn synth_homodyne_iq_frames(s: &RadarScenario) -> Result<IqFrames> {
    synthesize_homodyne_iq(s).map(|x| x.frames)
}

/// I/Q pair for whichever architecture the scenario declares.
pub fn synthesize_iq(s: &RadarScenario) -> Result<Synthesis<IqFrames>> {
    match s.architecture {
        Architecture::Heterodyne => synthesize_aspc_iq(s),
        Architecture::Homodyne => synthesize_homodyne_iq(s),
    }
}
