//! Moving-target range-Doppler comparison with an injected oscillator
//! frequency offset and, on the quadrature twin, an injected I/Q imbalance.

use crate::aspc;
use crate::error::Result;
use crate::iqcorr::{self, CalibrationConfig};
use crate::model::{ImbalanceSpec, RadarScenario, TargetSpec};
use crate::spc;
use crate::spectra::{self, RangeDopplerMap, SnrMeasurement};

use super::experiment_a::{matched_frames, reject};
use super::{paths, ExperimentConfig, ExperimentOutput, Report};

/// Default injected offset when the scenario sets none, Doppler bins.
pub const DEFAULT_OFFSET_BINS: f64 = 10.0;
/// Twin amplitude mismatch used when the scenario has no imbalance.
pub const DEFAULT_TWIN_AMPLITUDE: f64 = 1.003;
/// Analytic IRR of the injected twin imbalance, dB.
pub const DEFAULT_TWIN_IRR_DB: f64 = 52.6;

pub const NONE_VELOCITY_ERROR_MIN_BINS: f64 = 5.0;
pub const CORRECTED_VELOCITY_ERROR_MAX_BINS: f64 = 1.0;
pub const MUR_RATIO_MIN: f64 = 2.0;
pub const CORRECTED_IRR_MIN_DB: f64 = 80.0;
pub const IRR_GAIN_MIN_DB: f64 = 25.0;
pub const PEAK_CHANGE_MAX_DB: f64 = 1.0;
pub const SNR_GAIN_MIN_DB: f64 = 10.0;

/// Imbalance with amplitude `amplitude` and the phase that gives an analytic
/// IRR of `irr_db`. The phase is zero when the amplitude alone already
/// limits the IRR below the request.
pub fn imbalance_for_irr(amplitude: f64, irr_db: f64) -> ImbalanceSpec {
    let r = 10f64.powf(irr_db / 10.0);
    let a2 = 1.0 + amplitude * amplitude;
    let cos = (a2 * (r - 1.0) / (2.0 * amplitude * (r + 1.0))).min(1.0);
    ImbalanceSpec {
        amplitude,
        phase: cos.acos(),
    }
}

/// Signed difference `a − b` in Doppler bins, wrapped to `[−M/2, M/2)`.
pub(super) fn doppler_bins_between(a: f64, b: f64, resolution: f64, bins: usize) -> f64 {
    let m = bins as f64;
    ((a - b) / resolution + m / 2.0).rem_euclid(m) - m / 2.0
}

/// Velocity folded into the map's Doppler axis.
fn wrap_velocity(v: f64, map: &RangeDopplerMap) -> f64 {
    let res = map.velocity_resolution();
    let span = res * map.doppler_bins() as f64;
    let lo = map.velocity_mps[0];
    lo + (v - lo).rem_euclid(span)
}

fn band_map(map: RangeDopplerMap, max_range: f64) -> RangeDopplerMap {
    let mut m = map.restricted_range(0.0, max_range);
    spectra::annotate_map(&mut m, spectra::PEAK_THRESHOLD_DB);
    m
}

/// Target as it should appear on a path that leaves `shift_hz` of beat and
/// `doppler_hz` of slow-time rotation uncorrected.
fn apparent(
    t: &TargetSpec,
    s: &RadarScenario,
    shift_hz: f64,
    doppler_hz: f64,
    map: &RangeDopplerMap,
) -> TargetSpec {
    let mut a = t.clone();
    a.range = t.range + shift_hz * s.sweep.range_per_hz();
    a.velocity = wrap_velocity(t.velocity + doppler_hz * s.sweep.wavelength() / 2.0, map);
    a
}

struct PathResult {
    snr: Option<SnrMeasurement>,
    velocity_error_bins: f64,
}

fn measure(map: &RangeDopplerMap, look: &TargetSpec, truth: &TargetSpec) -> PathResult {
    match spectra::measure_snr_map(map, look) {
        Ok(m) => PathResult {
            velocity_error_bins: doppler_bins_between(
                m.velocity_mps,
                truth.velocity,
                map.velocity_resolution(),
                map.doppler_bins(),
            ),
            snr: Some(m),
        },
        Err(_) => PathResult {
            snr: None,
            velocity_error_bins: f64::NAN,
        },
    }
}

pub fn experiment_b(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut s = config.prepared_scenario();
    if s.targets.is_empty() {
        return Err(reject(
            "moving target required",
            "experiment b needs at least one target".into(),
        ));
    }
    let doppler_bin_hz = 1.0 / (s.sweep.chirps as f64 * s.sweep.sweep_period);
    if s.defects.f_offset == 0.0 {
        s.defects.f_offset = DEFAULT_OFFSET_BINS * doppler_bin_hz;
    }
    let imbalance = if s.imbalance == ImbalanceSpec::default() {
        imbalance_for_irr(DEFAULT_TWIN_AMPLITUDE, DEFAULT_TWIN_IRR_DB)
    } else {
        s.imbalance
    };
    let m = matched_frames(&s, Some(imbalance))?;
    let calibration = CalibrationConfig::default();
    let truth = s.targets[0].clone();

    let none = paths::none_real(&m.real.frames, s.sampling.if_carrier);
    let (spc_out, spc_est) = paths::spc_real(&m.real.frames, s.processing.nfft_estimation)?;
    let z = m.iq.frames.to_complex();
    let none_q = paths::none_quadrature(&z, m.twin.sampling.if_carrier);
    let aspc_out = paths::aspc_quadrature(
        &m.iq.frames,
        m.twin.processing.nfft_estimation,
        config.use_iq_correction,
        &calibration,
    )?;

    let max_range = s.sampling.min_rate / 2.0 * s.sweep.range_per_hz();
    let window = s.processing.window;
    let map_none = band_map(spectra::range_doppler_map(&none, window)?, max_range);
    let map_spc = band_map(spectra::range_doppler_map(&spc_out, window)?, max_range);
    let map_none_q = band_map(spectra::range_doppler_map(&none_q, window)?, max_range);
    let map_aspc = band_map(
        spectra::range_doppler_map(&aspc_out.output, window)?,
        max_range,
    );

    let offset = s.defects.f_offset;
    let leak = s.leakage.f_beat;
    let r_none = measure(
        &map_none,
        &apparent(&truth, &s, leak + offset, offset, &map_none),
        &truth,
    );
    let r_spc = measure(&map_spc, &truth, &truth);
    let r_none_q = measure(
        &map_none_q,
        &apparent(&truth, &s, leak + offset, offset, &map_none_q),
        &truth,
    );
    let r_aspc = measure(&map_aspc, &truth, &truth);

    let irr_before = iqcorr::measured_irr(&z)?;
    let irr_after = match &aspc_out.imbalance {
        Some(est) => Some(iqcorr::measured_irr(&iqcorr::correct_frames(
            &m.iq.frames,
            est,
        )?)?),
        None => None,
    };
    let mur_spc = spc::spc_mur(&s.sampling, &spc_est);
    let mur_aspc = aspc::aspc_mur(&s.sampling);
    let mur_ratio = mur_aspc / mur_spc;

    let mut report = Report::new("b", &s, config.scale);
    report.metric("f_offset_hz", offset);
    report.metric("doppler_bin_hz", doppler_bin_hz);
    report.metric("velocity_resolution_mps", map_spc.velocity_resolution());
    report.metric("predicted_none_error_bins", offset / doppler_bin_hz);
    report.metric("twin_imbalance_amplitude", imbalance.amplitude);
    report.metric("twin_imbalance_phase_rad", imbalance.phase);
    report.metric(
        "irr_analytic_db",
        iqcorr::irr(imbalance.amplitude, imbalance.phase),
    );
    report.metric("irr_measured_before_db", irr_before);
    if let Some(after) = irr_after {
        report.metric("irr_measured_after_db", after);
        report.metric("irr_gain_db", after - irr_before);
    }
    if let Some(est) = &aspc_out.imbalance {
        report.metric("estimated_amplitude", est.amplitude);
        report.metric("estimated_phase_rad", est.phase);
    }
    report.metric("spc_mur_hz", mur_spc);
    report.metric("aspc_mur_hz", mur_aspc);
    report.metric("mur_ratio", mur_ratio);
    for (name, r, map) in [
        ("none", &r_none, &map_none),
        ("spc", &r_spc, &map_spc),
        ("none_q", &r_none_q, &map_none_q),
        ("aspc", &r_aspc, &map_aspc),
    ] {
        report.metric(&format!("map_floor_{name}_db"), map.floor_db);
        report.metric(
            &format!("velocity_error_{name}_bins"),
            r.velocity_error_bins,
        );
        if let Some(m) = &r.snr {
            report.metric(&format!("snr_{name}_db"), m.snr_db);
            report.metric(&format!("peak_{name}_db"), m.peak_db);
            report.metric(&format!("velocity_{name}_mps"), m.velocity_mps);
        }
    }

    let err_detail = |r: &PathResult| {
        if r.snr.is_some() {
            format!("{:+.2} bins", r.velocity_error_bins)
        } else {
            "target not found".to_string()
        }
    };
    report.claim(
        "velocity_none_biased",
        r_none.velocity_error_bins.abs() >= NONE_VELOCITY_ERROR_MIN_BINS,
        format!(
            "none-path error {} >= {NONE_VELOCITY_ERROR_MIN_BINS} bins",
            err_detail(&r_none)
        ),
    );
    for (name, r) in [("velocity_spc", &r_spc), ("velocity_aspc", &r_aspc)] {
        report.claim(
            name,
            r.velocity_error_bins.abs() <= CORRECTED_VELOCITY_ERROR_MAX_BINS,
            format!(
                "error {} within ±{CORRECTED_VELOCITY_ERROR_MAX_BINS} bin",
                err_detail(r)
            ),
        );
    }
    report.claim(
        "mur_ratio",
        mur_ratio > MUR_RATIO_MIN,
        format!("A-SPC {mur_aspc:.0} Hz / SPC {mur_spc:.0} Hz = {mur_ratio:.4} > {MUR_RATIO_MIN}"),
    );
    if let Some(after) = irr_after {
        report.claim(
            "irr_corrected",
            after >= CORRECTED_IRR_MIN_DB,
            format!("measured IRR after correction {after:.2} dB >= {CORRECTED_IRR_MIN_DB} dB"),
        );
        report.claim(
            "irr_gain",
            after - irr_before >= IRR_GAIN_MIN_DB,
            format!(
                "IRR gain {:.2} dB >= {IRR_GAIN_MIN_DB} dB",
                after - irr_before
            ),
        );
    }
    let (peak_change, snr_gain) = match (&r_none_q.snr, &r_aspc.snr) {
        (Some(a), Some(b)) => (b.peak_db - a.peak_db, b.snr_db - a.snr_db),
        _ => (f64::NAN, f64::NAN),
    };
    report.metric("peak_change_aspc_db", peak_change);
    report.metric("snr_gain_aspc_db", snr_gain);
    if let (Some(a), Some(b)) = (&r_none.snr, &r_spc.snr) {
        report.metric("snr_gain_spc_db", b.snr_db - a.snr_db);
    }
    report.claim(
        "peak_power_preserved",
        peak_change.abs() <= PEAK_CHANGE_MAX_DB,
        format!("A-SPC target peak change {peak_change:+.3} dB within ±{PEAK_CHANGE_MAX_DB} dB"),
    );
    report.claim(
        "snr_gain_aspc",
        snr_gain >= SNR_GAIN_MIN_DB,
        format!("A-SPC 2-D SNR gain {snr_gain:.2} dB >= {SNR_GAIN_MIN_DB} dB"),
    );

    let mut out = ExperimentOutput::new(report);
    out.maps.push(("none".into(), map_none));
    out.maps.push(("spc".into(), map_spc));
    out.maps.push(("none_q".into(), map_none_q));
    out.maps.push(("aspc".into(), map_aspc));
    Ok(out)
}
