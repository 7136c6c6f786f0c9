//! Scenario and configuration types.
//!
//! A [`RadarScenario`] fully parameterizes one simulated radar: the sweep, the
//! ADC sampling plan, oscillator defects, the leakage path, the targets, the
//! quadrature imbalance of the demodulator and the additive thermal noise.
//! Everything here is an immutable value object; the signal chain reads it but
//! never mutates it.

use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Propagation speed used for every range and wavelength conversion.
///
/// The published parameter tables (range resolutions 1.074 m / 1.221 m,
/// 1100 m for a 1.25 MHz beat) are only mutually consistent with the rounded
/// 3e8 m/s figure, so that value is used throughout.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// RNG stream identifiers; each random process draws from its own stream so
/// adding a target never perturbs the leakage realization.
pub(crate) mod stream {
    pub const DEFECTS: u64 = 1;
    pub const LEAKAGE_PHASE_NOISE: u64 = 2;
    pub const THERMAL_I: u64 = 3;
    pub const THERMAL_Q: u64 = 4;
    pub const TARGET_BASE: u64 = 100;
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Heterodyne,
    Homodyne,
}

/// Linear-FM sweep and per-chirp sample bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    /// Start frequency of the sweep, Hz.
    pub f_start: f64,
    /// Swept bandwidth, Hz.
    pub bandwidth: f64,
    /// Sweep period, seconds.
    pub sweep_period: f64,
    /// Samples acquired per chirp before the early part is discarded.
    pub samples_per_chirp: usize,
    /// Samples kept at the end of each chirp.
    pub samples_kept: usize,
    /// Chirps per frame.
    pub chirps: usize,
}

impl SweepParams {
    pub fn center_frequency(&self) -> f64 {
        self.f_start + 0.5 * self.bandwidth
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_frequency()
    }

    /// Metres of range per hertz of beat frequency, `c·T / (2·BW)`.
    pub fn range_per_hz(&self) -> f64 {
        SPEED_OF_LIGHT * self.sweep_period / (2.0 * self.bandwidth)
    }

    /// Beat frequency of a point scatterer at `range` metres.
    pub fn beat_frequency(&self, range: f64) -> f64 {
        2.0 * range * self.bandwidth / (SPEED_OF_LIGHT * self.sweep_period)
    }

    /// Doppler frequency for a radial velocity (positive = approaching).
    pub fn doppler(&self, velocity: f64) -> f64 {
        2.0 * velocity / self.wavelength()
    }

    /// Samples dropped at the start of each chirp.
    pub fn discarded(&self) -> usize {
        self.samples_per_chirp.saturating_sub(self.samples_kept)
    }

    /// Range resolution after discarding the early part of each chirp.
    pub fn apparent_range_resolution(&self) -> f64 {
        let kept_fraction = self.samples_kept as f64 / self.samples_per_chirp as f64;
        SPEED_OF_LIGHT / (2.0 * self.bandwidth * kept_fraction)
    }
}

/// Positive rational number, kept as a pair so the quarter-point rule is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u32,
    pub den: u32,
}

impl Ratio {
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Self {
        Self { num, den }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Technique {
    /// Real oversampled signal, real NCO. Requires strategic frequency planning.
    Spc,
    /// Quadrature signal, complex NCO.
    Aspc,
}

/// ADC plan: minimum rate, oversampling, undersampling and IF carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Minimum available sampling frequency F_s, Hz.
    pub min_rate: f64,
    /// Oversampling factor Q (1 = no oversampling).
    pub oversampling: Ratio,
    /// Undersampling factor N.
    pub undersampling: u32,
    /// IF carrier frequency, Hz (zero for homodyne).
    pub if_carrier: f64,
    pub technique: Technique,
}

impl SamplingPlan {
    /// SPC plan with the IF carrier placed on the quarter point.
    pub fn spc(min_rate: f64, oversampling: Ratio, undersampling: u32) -> Self {
        let mut plan = Self {
            min_rate,
            oversampling,
            undersampling,
            if_carrier: 0.0,
            technique: Technique::Spc,
        };
        plan.if_carrier = plan.quarter_point();
        plan
    }

    /// Quadrature plan without oversampling.
    pub fn aspc(rate: f64, if_carrier: f64) -> Self {
        Self {
            min_rate: rate,
            oversampling: Ratio::ONE,
            undersampling: 0,
            if_carrier,
            technique: Technique::Aspc,
        }
    }

    /// Rate the ADC actually runs at, `Q·F_s`.
    pub fn effective_rate(&self) -> f64 {
        self.min_rate * self.oversampling.num as f64 / self.oversampling.den as f64
    }

    pub fn sample_interval(&self) -> f64 {
        1.0 / self.effective_rate()
    }

    /// `Q·F_s·(4N+1)/4`.
    pub fn quarter_point(&self) -> f64 {
        let q_num = self.oversampling.num as f64;
        let q_den = self.oversampling.den as f64;
        let four_n_plus_one = (4 * self.undersampling + 1) as f64;
        self.min_rate * q_num * four_n_plus_one / (4.0 * q_den)
    }

    /// True when the IF carrier sits on the quarter point (relative 1e-12).
    pub fn satisfies_quarter_point(&self) -> bool {
        let qp = self.quarter_point();
        (self.if_carrier - qp).abs() <= 1e-12 * qp.abs().max(1.0)
    }
}

/// Zero-mean law for the per-chirp random frequency components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum RandomLaw {
    #[default]
    None,
    Uniform {
        half_width: f64,
    },
    Gaussian {
        sigma: f64,
    },
}

impl RandomLaw {
    fn sample(self, rng: &mut ChaCha20Rng) -> f64 {
        match self {
            RandomLaw::None => 0.0,
            RandomLaw::Uniform { half_width } if half_width > 0.0 => {
                Uniform::new_inclusive(-half_width, half_width)
                    .expect("finite uniform bounds")
                    .sample(rng)
            }
            RandomLaw::Gaussian { sigma } if sigma > 0.0 => {
                Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
            }
            _ => 0.0,
        }
    }

    fn is_valid(self) -> bool {
        match self {
            RandomLaw::None => true,
            RandomLaw::Uniform { half_width } => half_width.is_finite() && half_width >= 0.0,
            RandomLaw::Gaussian { sigma } => sigma.is_finite() && sigma >= 0.0,
        }
    }
}

/// Carrier offset plus per-chirp random frequency components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorDefects {
    /// Constant carrier offset, Hz.
    pub f_offset: f64,
    /// Fast-time random component, drawn once per chirp.
    #[serde(default)]
    pub random_fast_time: RandomLaw,
    /// Slow-time random component, drawn once per chirp.
    #[serde(default)]
    pub random_slow_time: RandomLaw,
    pub seed: u64,
}

impl Default for OscillatorDefects {
    fn default() -> Self {
        Self {
            f_offset: 0.0,
            random_fast_time: RandomLaw::None,
            random_slow_time: RandomLaw::None,
            seed: 0,
        }
    }
}

/// Per-chirp random draws, shared by the leakage and every target.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpDraws {
    pub fast_time: Vec<f64>,
    pub slow_time: Vec<f64>,
}

impl OscillatorDefects {
    /// Draws `chirps` values for each random component; all fast-time draws
    /// come first, then all slow-time draws, from one seeded stream.
    pub fn draw(&self, chirps: usize) -> ChirpDraws {
        let mut rng = stream_rng(self.seed, stream::DEFECTS);
        let fast_time = (0..chirps)
            .map(|_| self.random_fast_time.sample(&mut rng))
            .collect();
        let slow_time = (0..chirps)
            .map(|_| self.random_slow_time.sample(&mut rng))
            .collect();
        ChirpDraws {
            fast_time,
            slow_time,
        }
    }
}

/// Piecewise log-log phase-noise skirt.
///
/// Each breakpoint is `(offset_hz, level_db)` where the level is the one-sided
/// power spectral density of the phase process in dB rad²/Hz. Between
/// breakpoints the level is linear in `log10(offset)`; below the first
/// breakpoint it is held, above the last it continues the final segment's
/// slope (or is held for a single breakpoint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PhaseNoiseSpec {
    #[serde(default)]
    pub breakpoints: Vec<(f64, f64)>,
    #[serde(default)]
    pub rce_enabled: bool,
    /// Self-mixing delay for the range correlation factor, seconds.
    #[serde(default)]
    pub rce_delay: f64,
}

impl PhaseNoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn flat(level_db: f64) -> Self {
        Self {
            breakpoints: vec![(1.0, level_db)],
            ..Self::default()
        }
    }

    pub fn skirt(breakpoints: &[(f64, f64)]) -> Self {
        Self {
            breakpoints: breakpoints.to_vec(),
            ..Self::default()
        }
    }

    pub fn with_rce(mut self, delay: f64) -> Self {
        self.rce_enabled = true;
        self.rce_delay = delay;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// Skirt level in dB at `offset` hertz, before any range correlation.
    pub fn level_db(&self, offset: f64) -> Option<f64> {
        let bp = &self.breakpoints;
        let (first, last) = (bp.first()?, bp.last()?);
        if bp.len() == 1 || offset <= first.0 {
            return Some(first.1);
        }
        let seg = |a: (f64, f64), b: (f64, f64)| {
            let slope = (b.1 - a.1) / (b.0.log10() - a.0.log10());
            a.1 + slope * (offset.log10() - a.0.log10())
        };
        if offset >= last.0 {
            return Some(seg(bp[bp.len() - 2], *last));
        }
        let i = bp.partition_point(|p| p.0 <= offset);
        Some(seg(bp[i - 1], bp[i]))
    }

    /// One-sided phase PSD in rad²/Hz, including the range correlation
    /// factor `4·sin²(π·f·τ)` when enabled.
    pub fn psd(&self, offset: f64) -> f64 {
        let Some(db) = self.level_db(offset) else {
            return 0.0;
        };
        let mut p = 10f64.powf(db / 10.0);
        if self.rce_enabled {
            let s = (std::f64::consts::PI * offset * self.rce_delay).sin();
            p *= 4.0 * s * s;
        }
        p
    }

    pub fn highest_offset(&self) -> Option<f64> {
        self.breakpoints.last().map(|b| b.0)
    }
}

/// Direct-coupling leakage path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageSpec {
    /// Beat-signal amplitude, volts.
    pub amplitude: f64,
    /// Beat frequency caused by internal delays, Hz.
    pub f_beat: f64,
    /// Phase, radians.
    pub theta: f64,
    #[serde(default)]
    pub phase_noise: PhaseNoiseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub amplitude: f64,
    /// Geometric range, metres.
    pub range: f64,
    /// Radial velocity, m/s; positive = approaching (positive Doppler).
    pub velocity: f64,
    pub theta: f64,
    #[serde(default)]
    pub phase_noise: PhaseNoiseSpec,
    /// Reuse the leakage phase-noise realization instead of an independent one.
    #[serde(default)]
    pub correlated_with_leakage: bool,
}

impl TargetSpec {
    pub fn point(amplitude: f64, range: f64, velocity: f64) -> Self {
        Self {
            amplitude,
            range,
            velocity,
            theta: 0.0,
            phase_noise: PhaseNoiseSpec::none(),
            correlated_with_leakage: false,
        }
    }
}

/// Amplitude (`A_E`) and phase (`θ_E`) mismatch of the Q channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceSpec {
    pub amplitude: f64,
    pub phase: f64,
}

impl Default for ImbalanceSpec {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Rectangular,
    #[default]
    Hann,
}

impl WindowKind {
    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Rectangular => "rectangular",
            WindowKind::Hann => "hann",
        }
    }
}

impl std::str::FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" | "rect" | "none" => Ok(WindowKind::Rectangular),
            "hann" => Ok(WindowKind::Hann),
            other => Err(Error::Parse(format!("unknown window `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessingParams {
    /// Zero-padded FFT size used to locate the leakage line.
    pub nfft_estimation: usize,
    #[serde(default)]
    pub window: WindowKind,
    /// Chirps averaged per reported power spectrum.
    pub spectrum_averages: usize,
}

/// Front-end figures carried for reference only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RfMetadata {
    pub f_stop: f64,
    pub transmit_power_dbm: f64,
    pub antenna_gain_dbi: f64,
    pub true_range_resolution: f64,
    pub desired_max_range: f64,
    pub apparent_range_resolution: f64,
    #[serde(default)]
    pub velocity_resolution: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarScenario {
    pub name: String,
    pub architecture: Architecture,
    /// Additive white noise, one-sided density in dB V²/Hz per channel.
    /// `None` disables thermal noise.
    #[serde(default)]
    pub thermal_noise_db_hz: Option<f64>,
    pub sweep: SweepParams,
    pub sampling: SamplingPlan,
    pub processing: ProcessingParams,
    #[serde(default)]
    pub defects: OscillatorDefects,
    pub leakage: LeakageSpec,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub imbalance: ImbalanceSpec,
    #[serde(default)]
    pub metadata: Option<RfMetadata>,
}

/// One broken invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

/// Ordered list of invariant violations plus non-blocking advisories.
///
/// `violations` is empty iff the scenario can be synthesized. Targets beyond
/// the maximum unambiguous range or velocity are still synthesizable (they
/// simply alias), so they are listed as advisories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub advisories: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, rule: &'static str, detail: impl Into<String>) {
        self.violations.push(Violation {
            rule,
            detail: detail.into(),
        });
    }

    fn advise(&mut self, rule: &'static str, detail: impl Into<String>) {
        self.advisories.push(Violation {
            rule,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.rule, v.detail))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

fn check_phase_noise(report: &mut ValidationReport, who: &str, pn: &PhaseNoiseSpec) {
    let bp = &pn.breakpoints;
    if bp
        .iter()
        .any(|b| !b.0.is_finite() || b.0 <= 0.0 || !b.1.is_finite())
    {
        report.push(
            "phase-noise breakpoints",
            format!("{who}: offsets must be positive and levels finite"),
        );
    }
    if bp.windows(2).any(|w| w[1].0 <= w[0].0) {
        report.push(
            "phase-noise breakpoints",
            format!("{who}: offsets must be strictly increasing"),
        );
    }
    if pn.rce_enabled && !(pn.rce_delay.is_finite() && pn.rce_delay >= 0.0) {
        report.push("phase-noise rce", format!("{who}: delay must be >= 0"));
    }
}

/// Checks every scenario invariant; never fails.
pub fn validate_scenario(s: &RadarScenario) -> ValidationReport {
    let mut r = ValidationReport::default();
    let sw = &s.sweep;
    if sw.samples_per_chirp == 0 || sw.samples_kept == 0 {
        r.push(
            "sample counts",
            "samples per chirp and samples kept must be > 0",
        );
    }
    if sw.samples_kept > sw.samples_per_chirp {
        r.push(
            "sample counts",
            format!(
                "samples kept {} exceeds samples per chirp {}",
                sw.samples_kept, sw.samples_per_chirp
            ),
        );
    }
    if sw.chirps == 0 {
        r.push("chirp count", "at least one chirp per frame");
    }
    if !(sw.bandwidth > 0.0 && sw.sweep_period > 0.0 && sw.f_start > 0.0) {
        r.push(
            "sweep",
            "start frequency, bandwidth and period must be positive",
        );
    }

    let sp = &s.sampling;
    if !(sp.min_rate > 0.0) || sp.oversampling.num == 0 || sp.oversampling.den == 0 {
        r.push("sampling plan", "F_s and Q must be positive");
    }
    if !sp.if_carrier.is_finite() || sp.if_carrier < 0.0 {
        r.push(
            "sampling plan",
            "IF carrier must be finite and non-negative",
        );
    }
    if sp.technique == Technique::Spc {
        if s.architecture == Architecture::Homodyne {
            r.push(
                "spc requires heterodyne",
                "a homodyne receiver has no IF stage to plan",
            );
        }
        if !sp.satisfies_quarter_point() {
            r.push(
                "strategic frequency planning",
                format!(
                    "IF carrier {} Hz is not at Q·F_s·(4N+1)/4 = {} Hz",
                    sp.if_carrier,
                    sp.quarter_point()
                ),
            );
        }
    }
    if s.architecture == Architecture::Homodyne {
        if sp.if_carrier != 0.0 {
            r.push(
                "homodyne forbids if carrier",
                format!("got {} Hz", sp.if_carrier),
            );
        }
        if s.defects.f_offset != 0.0 {
            r.push(
                "homodyne forbids f_offset",
                format!("got {} Hz", s.defects.f_offset),
            );
        }
    }
    if !s.defects.random_fast_time.is_valid() || !s.defects.random_slow_time.is_valid() {
        r.push("random laws", "widths must be finite and non-negative");
    }

    let rate = sp.effective_rate();
    let lk = &s.leakage;
    if !(lk.amplitude > 0.0) {
        r.push("leakage amplitude", "must be > 0");
    }
    if !(lk.f_beat >= 0.0 && lk.f_beat < rate / 2.0) {
        r.push(
            "leakage beat frequency",
            format!("{} Hz outside [0, {} Hz)", lk.f_beat, rate / 2.0),
        );
    }
    check_phase_noise(&mut r, "leakage", &lk.phase_noise);

    if !(s.imbalance.amplitude > 0.0) || !s.imbalance.phase.is_finite() {
        r.push("imbalance", "A_E must be > 0 and theta_E finite");
    }
    if let Some(n0) = s.thermal_noise_db_hz {
        if !n0.is_finite() {
            r.push("thermal noise", "level must be finite");
        }
    }
    if s.processing.nfft_estimation < sw.samples_kept {
        r.push(
            "estimation nfft",
            format!(
                "nfft {} smaller than samples kept {}",
                s.processing.nfft_estimation, sw.samples_kept
            ),
        );
    }
    if s.processing.spectrum_averages == 0 {
        r.push("spectrum averages", "must be >= 1");
    }

    if r.is_valid() {
        let mur_hz = technique_mur_hz(sp);
        let v_max = sw.wavelength() / (4.0 * sw.sweep_period);
        for (i, t) in s.targets.iter().enumerate() {
            check_phase_noise(&mut r, "target", &t.phase_noise);
            if sw.beat_frequency(t.range) >= mur_hz || t.range < 0.0 {
                r.advise(
                    "target beyond MUR",
                    format!(
                        "target {i} at {} m (MUR {} m)",
                        t.range,
                        mur_hz * sw.range_per_hz()
                    ),
                );
            }
            if t.velocity.abs() >= v_max {
                r.advise(
                    "target beyond unambiguous velocity",
                    format!("target {i}: |{}| >= {} m/s", t.velocity, v_max),
                );
            }
        }
    }
    r
}

/// Nominal alias-free beat extent of an ideal plan: `rate/4` for SPC,
/// `rate/2` for the quadrature technique.
pub fn technique_mur_hz(plan: &SamplingPlan) -> f64 {
    match plan.technique {
        Technique::Spc => plan.effective_rate() / 4.0,
        Technique::Aspc => plan.effective_rate() / 2.0,
    }
}

/// Derived axis quantities for a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisSet {
    pub effective_rate: f64,
    pub wavelength: f64,
    pub range_per_hz: f64,
    /// Range spacing of a `samples_kept`-point fast-time FFT.
    pub range_bin_spacing: f64,
    pub apparent_range_resolution: f64,
    /// Desired digital bandwidth, `F_s/2`.
    pub desired_band_hz: f64,
    /// Maximum detectable range, range of the desired band edge.
    pub max_range: f64,
    pub velocity_resolution: f64,
    pub unambiguous_velocity: f64,
    /// Nominal maximum unambiguous beat frequency of the scenario's technique.
    pub mur_hz: f64,
    pub mur_m: f64,
}

impl AxisSet {
    /// Range spacing of an `nfft`-point fast-time FFT,
    /// `c·rate / (2·(BW/T)·nfft)`.
    pub fn range_spacing(&self, nfft: usize) -> f64 {
        self.effective_rate / nfft as f64 * self.range_per_hz
    }
}

pub fn derive_axes(s: &RadarScenario) -> Result<AxisSet> {
    let report = validate_scenario(s);
    if !report.is_valid() {
        return Err(Error::InvalidScenario(report));
    }
    let sw = &s.sweep;
    let rate = s.sampling.effective_rate();
    let range_per_hz = sw.range_per_hz();
    let wavelength = sw.wavelength();
    let mur_hz = technique_mur_hz(&s.sampling);
    let desired_band_hz = s.sampling.min_rate / 2.0;
    Ok(AxisSet {
        effective_rate: rate,
        wavelength,
        range_per_hz,
        range_bin_spacing: rate / sw.samples_kept as f64 * range_per_hz,
        apparent_range_resolution: sw.apparent_range_resolution(),
        desired_band_hz,
        max_range: desired_band_hz * range_per_hz,
        velocity_resolution: wavelength / (2.0 * sw.chirps as f64 * sw.sweep_period),
        unambiguous_velocity: wavelength / (4.0 * sw.sweep_period),
        mur_hz,
        mur_m: mur_hz * range_per_hz,
    })
}

const PRESET_TABLE1: &str = include_str!("../presets/table1.toml");
const PRESET_TABLE2: &str = include_str!("../presets/table2.toml");
const PRESET_TABLE3: &str = include_str!("../presets/table3.toml");

pub const PRESET_NAMES: [&str; 3] = ["table1", "table2", "table3"];

impl RadarScenario {
    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "table1" => PRESET_TABLE1,
            "table2" => PRESET_TABLE2,
            "table3" => PRESET_TABLE3,
            other => return Err(Error::Parse(format!("unknown preset `{other}`"))),
        };
        Self::from_toml_str(text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario is always representable as TOML")
    }

    /// Loads a scenario file, or a built-in preset when `path` names one.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if let Some(name) = path.to_str().filter(|p| PRESET_NAMES.contains(p)) {
            return Self::preset(name);
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_scenario(self)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(report))
        }
    }

    pub fn axes(&self) -> Result<AxisSet> {
        derive_axes(self)
    }

    /// First 8 bytes of SHA-256 over the canonical TOML form.
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    pub fn rate(&self) -> f64 {
        self.sampling.effective_rate()
    }

    /// Shrinks the frame to at most `chirps` chirps (and averages).
    pub fn with_chirps(mut self, chirps: usize) -> Self {
        self.sweep.chirps = chirps;
        self.processing.spectrum_averages = self.processing.spectrum_averages.min(chirps);
        self
    }

    /// Desk-scale variant: 64 chirps, sample counts and estimation padding
    /// factor unchanged.
    pub fn desk_scaled(self) -> Self {
        let chirps = self.sweep.chirps.min(DESK_CHIRPS);
        self.with_chirps(chirps)
    }

    /// Critically sampled quadrature twin of an oversampled plan: rate,
    /// sample counts and estimation FFT size divided by Q, IF carrier set to
    /// `if_carrier`.
    pub fn quadrature_twin(&self, if_carrier: f64) -> Result<Self> {
        let q = self.sampling.oversampling;
        let scale = |n: usize| -> Result<usize> {
            let scaled = n as u64 * q.den as u64;
            if scaled % q.num as u64 != 0 {
                return Err(Error::Parse(format!(
                    "count {n} not divisible by oversampling {}/{}",
                    q.num, q.den
                )));
            }
            Ok((scaled / q.num as u64) as usize)
        };
        let mut twin = self.clone();
        twin.name = format!("{}-quadrature", self.name);
        twin.sweep.samples_per_chirp = scale(self.sweep.samples_per_chirp)?;
        twin.sweep.samples_kept = scale(self.sweep.samples_kept)?;
        twin.processing.nfft_estimation = scale(self.processing.nfft_estimation)?;
        twin.sampling = SamplingPlan::aspc(self.sampling.min_rate, if_carrier);
        Ok(twin)
    }
}

pub const DESK_CHIRPS: usize = 64;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in PRESET_NAMES {
            let s = RadarScenario::preset(name).unwrap();
            let report = s.validate();
            assert!(report.is_valid(), "{name}: {report}");
        }
    }

    #[test]
    fn table1_quarter_point() {
        let s = RadarScenario::preset("table1").unwrap();
        assert_eq!(s.sampling.effective_rate(), 10e6);
        assert_eq!(s.sampling.quarter_point(), 2.5e6);
        assert!(s.sampling.satisfies_quarter_point());
    }

    #[test]
    fn off_quarter_point_is_flagged() {
        let mut s = RadarScenario::preset("table1").unwrap();
        s.sampling.if_carrier = 2.4e6;
        assert!(s.validate().has_rule("strategic frequency planning"));
        assert!(matches!(derive_axes(&s), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn homodyne_offset_is_flagged() {
        let mut s = RadarScenario::preset("table3").unwrap();
        s.defects.f_offset = 100.0;
        let report = s.validate();
        assert!(report.has_rule("homodyne forbids f_offset"), "{report}");
    }

    #[test]
    fn homodyne_if_and_spc_are_flagged() {
        let mut s = RadarScenario::preset("table3").unwrap();
        s.sampling.if_carrier = 1e6;
        assert!(s.validate().has_rule("homodyne forbids if carrier"));
        s.sampling.technique = Technique::Spc;
        assert!(s.validate().has_rule("spc requires heterodyne"));
    }

    #[test]
    fn sample_counts_checked() {
        let mut s = RadarScenario::preset("table1").unwrap();
        s.sweep.samples_kept = s.sweep.samples_per_chirp + 1;
        assert!(s.validate().has_rule("sample counts"));
    }

    #[test]
    fn breakpoints_must_increase() {
        let mut s = RadarScenario::preset("table1").unwrap();
        s.leakage.phase_noise.breakpoints = vec![(1e4, -90.0), (1e3, -80.0)];
        assert!(s.validate().has_rule("phase-noise breakpoints"));
    }

    #[test]
    fn far_target_is_advisory_only() {
        let mut s = RadarScenario::preset("table1").unwrap();
        s.targets = vec![TargetSpec::point(0.01, 5000.0, 0.0)];
        let report = s.validate();
        assert!(report.is_valid());
        assert_eq!(report.advisories.len(), 1);
    }

    #[test]
    fn table_axes() {
        let t1 = RadarScenario::preset("table1").unwrap().axes().unwrap();
        assert!((t1.apparent_range_resolution - 1.074).abs() < 1e-3);
        assert!((t1.max_range - 1100.0).abs() < 1.0);
        let t2 = RadarScenario::preset("table2").unwrap().axes().unwrap();
        assert!((t2.velocity_resolution - 0.0462).abs() < 2e-4);
        let t3 = RadarScenario::preset("table3").unwrap().axes().unwrap();
        assert!((t3.apparent_range_resolution - 1.221).abs() < 1e-3);
        assert!((t3.max_range - 1250.0).abs() < 1.0);
        assert!((t3.velocity_resolution - 0.0812).abs() < 2e-4);
        // with no zero padding the fast-time bin spacing is the apparent resolution
        assert!((t1.range_bin_spacing - t1.apparent_range_resolution).abs() < 1e-12);
    }

    #[test]
    fn beat_frequency_matches_table1_max_range() {
        let s = RadarScenario::preset("table1").unwrap();
        assert!((s.sweep.beat_frequency(1100.0) - 1.25e6).abs() < 1e-6);
    }

    #[test]
    fn skirt_interpolation() {
        let pn = PhaseNoiseSpec::skirt(&[(1e3, -80.0), (1e5, -120.0)]);
        assert_eq!(pn.level_db(10.0), Some(-80.0));
        assert!((pn.level_db(1e4).unwrap() + 100.0).abs() < 1e-12);
        // extrapolates the last slope (-20 dB/decade)
        assert!((pn.level_db(1e6).unwrap() + 140.0).abs() < 1e-9);
        assert_eq!(PhaseNoiseSpec::flat(-120.0).level_db(5e6), Some(-120.0));
        assert_eq!(PhaseNoiseSpec::none().psd(1e3), 0.0);
    }

    #[test]
    fn draws_are_reproducible() {
        let d = OscillatorDefects {
            f_offset: 0.0,
            random_fast_time: RandomLaw::Gaussian { sigma: 10.0 },
            random_slow_time: RandomLaw::Uniform { half_width: 3.0 },
            seed: 7,
        };
        assert_eq!(d.draw(32), d.draw(32));
        let other = OscillatorDefects {
            seed: 8,
            ..d.clone()
        };
        assert_ne!(d.draw(32), other.draw(32));
        assert!(d.draw(32).slow_time.iter().all(|v| v.abs() <= 3.0));
    }

    #[test]
    fn quadrature_twin_of_table1() {
        let s = RadarScenario::preset("table1").unwrap();
        let twin = s.quadrature_twin(0.0).unwrap();
        assert_eq!(twin.sweep.samples_per_chirp, 2200);
        assert_eq!(twin.sweep.samples_kept, 2048);
        assert_eq!(twin.processing.nfft_estimation, 1 << 18);
        assert_eq!(twin.rate(), 2.5e6);
        assert!(twin.validate().is_valid());
    }
}
