//! Homodyne receiver: range accuracy of a hovering target, 2-D SNR of a
//! moving target, and a paired run with the range correlation effect
//! toggled.

use crate::error::Result;
use crate::frame::RealCube;
use crate::iqcorr::CalibrationConfig;
use crate::model::{Architecture, RadarScenario, TargetSpec};
use crate::spectra::{self, PowerSpectrum, RangeDopplerMap};
use crate::synth;

use super::experiment_a::reject;
use super::{paths, ExperimentConfig, ExperimentOutput, Report};

pub const RANGE_ERROR_MAX_BINS: f64 = 1.0;
pub const NONE_RANGE_BIAS_MIN_BINS: f64 = 3.0;
pub const MOVING_SNR_GAIN_MIN_DB: f64 = 3.0;
pub const RCE_SHAPE_CHANGE_MIN_DB: f64 = 3.0;
pub const RCE_IMPROVEMENT_MIN_DB: f64 = 3.0;
/// Close-in and far bands for floor-shape comparisons, Hz.
pub const NEAR_BAND_HZ: (f64, f64) = (25e3, 150e3);
pub const FAR_BAND_FRACTION: f64 = 0.6;

/// Targets used when the scenario defines none: one hovering, one moving.
pub fn default_targets() -> Vec<TargetSpec> {
    vec![
        TargetSpec::point(0.01, 40.0, 0.0),
        TargetSpec::point(0.01, 200.0, 3.0),
    ]
}

struct Run {
    none: PowerSpectrum,
    aspc: PowerSpectrum,
    map_none: RangeDopplerMap,
    map_aspc: RangeDopplerMap,
}

fn spectrum_of(frames: &RealCube, s: &RadarScenario, band_hi: f64) -> Result<PowerSpectrum> {
    let avg = s.processing.spectrum_averages.min(frames.chirps());
    spectra::power_spectrum(frames, s.processing.window, frames.samples(), avg)?
        .restricted(0.0, band_hi)
}

fn run_paths(s: &RadarScenario, use_iq_correction: bool) -> Result<Run> {
    let iq = synth::synth_homodyne_iq_frames(s)?;
    let mut none = iq.i.clone();
    none.meta = iq.i.meta.tagged("none");
    let aspc = paths::aspc_quadrature(
        &iq,
        s.processing.nfft_estimation,
        use_iq_correction,
        &CalibrationConfig::default(),
    )?;
    let band_hi = s.sampling.min_rate / 2.0;
    let max_range = band_hi * s.sweep.range_per_hz();
    let window = s.processing.window;
    let map = |f: &RealCube| -> Result<RangeDopplerMap> {
        let mut m = spectra::range_doppler_map(f, window)?.restricted_range(0.0, max_range);
        spectra::annotate_map(&mut m, spectra::PEAK_THRESHOLD_DB);
        Ok(m)
    };
    Ok(Run {
        none: spectrum_of(&none, s, band_hi)?,
        aspc: spectrum_of(&aspc.output, s, band_hi)?,
        map_none: map(&none)?,
        map_aspc: map(&aspc.output)?,
    })
}

/// Strongest local maximum of the spectrum within `[lo, hi]` metres.
fn strongest_in(spectrum: &PowerSpectrum, lo: f64, hi: f64) -> Option<usize> {
    let p = &spectrum.power_db;
    (0..spectrum.len())
        .filter(|&k| (lo..=hi).contains(&spectrum.range_m[k]))
        .filter(|&k| (k == 0 || p[k - 1] <= p[k]) && (k + 1 >= p.len() || p[k + 1] <= p[k]))
        .max_by(|&a, &b| p[a].total_cmp(&p[b]))
}

fn floor_in(spectrum: &PowerSpectrum, lo: f64, hi: f64) -> Result<f64> {
    spectra::noise_floor(spectrum, lo..=hi, spectra::DEFAULT_GUARD_BINS)
}

pub fn experiment_c(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut s = config.prepared_scenario();
    if s.architecture != Architecture::Homodyne {
        return Err(reject(
            "homodyne required",
            "experiment c runs the baseband receiver".into(),
        ));
    }
    if s.targets.is_empty() {
        s.targets = default_targets();
    }
    let hovering = s.targets.iter().find(|t| t.velocity == 0.0).cloned();
    let moving = s.targets.iter().find(|t| t.velocity != 0.0).cloned();

    let run = run_paths(&s, config.use_iq_correction)?;
    let mut toggled = s.clone();
    toggled.leakage.phase_noise.rce_enabled = !s.leakage.phase_noise.rce_enabled;
    if toggled.leakage.phase_noise.rce_enabled && toggled.leakage.phase_noise.rce_delay == 0.0 {
        return Err(reject(
            "rce delay required",
            "cannot enable the range correlation effect with zero delay".into(),
        ));
    }
    let paired = run_paths(&toggled, config.use_iq_correction)?;

    let rph = s.sweep.range_per_hz();
    let bin_m = run.none.bin_width() * rph;
    let leak_m = s.leakage.f_beat * rph;
    let band_hi = s.sampling.min_rate / 2.0;

    let mut report = Report::new("c", &s, config.scale);
    report.metric("range_bin_m", bin_m);
    report.metric("leakage_equivalent_bins", leak_m / bin_m);

    if let Some(t) = &hovering {
        let reach = leak_m.abs() + 3.0 * bin_m;
        let find = |sp: &PowerSpectrum| {
            strongest_in(sp, t.range - reach, t.range + reach).map(|k| sp.range_m[k])
        };
        let r_none = find(&run.none);
        let r_aspc = find(&run.aspc);
        let err = |r: Option<f64>| r.map_or(f64::NAN, |r| (r - t.range) / bin_m);
        let (e_none, e_aspc) = (err(r_none), err(r_aspc));
        report.metric("hover_range_true_m", t.range);
        report.metric("hover_range_none_m", r_none.unwrap_or(f64::NAN));
        report.metric("hover_range_aspc_m", r_aspc.unwrap_or(f64::NAN));
        report.metric("hover_error_none_bins", e_none);
        report.metric("hover_error_aspc_bins", e_aspc);
        let mut look = t.clone();
        look.range += leak_m;
        let snr_none = spectra::measure_snr_spectrum(&run.none, &look).map(|m| m.snr_db);
        let snr_aspc = spectra::measure_snr_spectrum(&run.aspc, t).map(|m| m.snr_db);
        if let (Ok(a), Ok(b)) = (&snr_none, &snr_aspc) {
            report.metric("hover_snr_none_db", *a);
            report.metric("hover_snr_aspc_db", *b);
            report.metric("hover_snr_gain_db", b - a);
        }
        report.claim(
            "range_aspc",
            e_aspc.abs() <= RANGE_ERROR_MAX_BINS,
            format!(
                "A-SPC hovering-target error {e_aspc:+.2} bins within ±{RANGE_ERROR_MAX_BINS} bin"
            ),
        );
        report.claim(
            "range_none_biased",
            e_none.abs() >= NONE_RANGE_BIAS_MIN_BINS,
            format!(
                "no-technique error {e_none:+.2} bins >= {NONE_RANGE_BIAS_MIN_BINS} (leakage beat {:.2} bins)",
                leak_m / bin_m
            ),
        );
    }

    if let Some(t) = &moving {
        let mut look = t.clone();
        look.range += leak_m;
        let snr_none = spectra::measure_snr_map(&run.map_none, &look);
        let snr_aspc = spectra::measure_snr_map(&run.map_aspc, t);
        let gain = match (&snr_none, &snr_aspc) {
            (Ok(a), Ok(b)) => {
                report.metric("moving_snr_none_db", a.snr_db);
                report.metric("moving_snr_aspc_db", b.snr_db);
                b.snr_db - a.snr_db
            }
            _ => f64::NAN,
        };
        report.metric("moving_snr_gain_db", gain);
        report.claim(
            "moving_snr_gain",
            gain >= MOVING_SNR_GAIN_MIN_DB,
            format!("A-SPC 2-D SNR gain {gain:.2} dB >= {MOVING_SNR_GAIN_MIN_DB} dB"),
        );
    }

    // floor shape and improvement, configured run vs toggled run
    let far = (FAR_BAND_FRACTION * band_hi, band_hi);
    let shape = |r: &Run| -> Result<(f64, f64)> {
        let near_none = floor_in(&r.none, NEAR_BAND_HZ.0, NEAR_BAND_HZ.1)?;
        let far_none = floor_in(&r.none, far.0, far.1)?;
        let near_aspc = floor_in(&r.aspc, NEAR_BAND_HZ.0, NEAR_BAND_HZ.1)?;
        Ok((near_none - far_none, near_none - near_aspc))
    };
    let (shape_cfg, improve_cfg) = shape(&run)?;
    let (shape_tog, improve_tog) = shape(&paired)?;
    let rce = s.leakage.phase_noise.rce_enabled;
    let (on, off) = if rce {
        ("configured", "toggled")
    } else {
        ("toggled", "configured")
    };
    report.metric("rce_enabled", if rce { 1.0 } else { 0.0 });
    report.metric("floor_shape_configured_db", shape_cfg);
    report.metric("floor_shape_toggled_db", shape_tog);
    report.metric("near_improvement_configured_db", improve_cfg);
    report.metric("near_improvement_toggled_db", improve_tog);
    let shape_change = (shape_cfg - shape_tog).abs();
    report.claim(
        "rce_changes_floor_shape",
        shape_change > RCE_SHAPE_CHANGE_MIN_DB,
        format!("near-minus-far floor differs by {shape_change:.2} dB between RCE {on}/{off} runs"),
    );
    report.claim(
        "rce_improvement_persists",
        improve_cfg > RCE_IMPROVEMENT_MIN_DB && improve_tog > RCE_IMPROVEMENT_MIN_DB,
        format!("near-band improvement {improve_cfg:.2} dB and {improve_tog:.2} dB > {RCE_IMPROVEMENT_MIN_DB} dB"),
    );

    let mut out = ExperimentOutput::new(report);
    let smooth = spectra::default_smoothing(run.none.len());
    out.curves.push((
        "aspc".into(),
        run.none.clone(),
        spectra::improvement_curve(&run.none, &run.aspc, smooth)?,
    ));
    out.curves.push((
        "aspc_rce_toggled".into(),
        paired.none.clone(),
        spectra::improvement_curve(&paired.none, &paired.aspc, smooth)?,
    ));
    out.spectra.push(("none".into(), run.none));
    out.spectra.push(("aspc".into(), run.aspc));
    out.spectra.push(("none_rce_toggled".into(), paired.none));
    out.spectra.push(("aspc_rce_toggled".into(), paired.aspc));
    out.maps.push(("none".into(), run.map_none));
    out.maps.push(("aspc".into(), run.map_aspc));
    Ok(out)
}
