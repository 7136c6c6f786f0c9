//! Leakage-only floor comparison: no technique, SPC on the oversampled real
//! IF frame, and A-SPC on a critically sampled quadrature twin that sees the
//! same oscillator noise.

use crate::dsp;
use crate::error::{Error, Result};
use crate::frame::RealCube;
use crate::iqcorr::CalibrationConfig;
use crate::model::{Architecture, RadarScenario, ValidationReport, Violation};
use crate::spc;
use crate::spectra::{self, PowerSpectrum};
use crate::synth;

use super::{median_of, paths, ExperimentConfig, ExperimentOutput, Report};

/// Required median A-SPC advantage over SPC in the far quarter of the band, dB.
pub const FAR_GAP_MIN_DB: f64 = 0.5;

pub(super) fn reject(rule: &'static str, detail: String) -> Error {
    let mut report = ValidationReport::default();
    report.violations.push(Violation { rule, detail });
    Error::InvalidScenario(report)
}

/// Integer oversampling factor, or an error when the plan has none.
pub(super) fn integer_oversampling(s: &RadarScenario) -> Result<usize> {
    let q = s.sampling.oversampling;
    if q.den == 0 || q.num % q.den != 0 || q.num / q.den < 2 {
        return Err(reject(
            "integer oversampling required",
            format!(
                "oversampling {}/{} cannot be decimated to a quadrature twin",
                q.num, q.den
            ),
        ));
    }
    Ok((q.num / q.den) as usize)
}

/// Real and quadrature frames with a common leakage phase-noise realization.
/// The twin runs at `F_s` with its IF carrier at `F_s/4`.
pub(super) struct MatchedFrames {
    pub twin: RadarScenario,
    pub real: synth::Synthesis<RealCube>,
    pub iq: synth::Synthesis<crate::frame::IqFrames>,
}

pub(super) fn matched_frames(
    s: &RadarScenario,
    twin_imbalance: Option<crate::model::ImbalanceSpec>,
) -> Result<MatchedFrames> {
    if s.architecture != Architecture::Heterodyne {
        return Err(reject(
            "heterodyne required",
            "the real and quadrature paths both need an IF stage".into(),
        ));
    }
    let q = integer_oversampling(s)?;
    let real = synth::synthesize_spc(s)?;
    let mut twin = s.quadrature_twin(s.sampling.min_rate / 4.0)?;
    if let Some(imb) = twin_imbalance {
        twin.imbalance = imb;
    }
    let shared = synth::leakage_phase_noise(s)?.decimated(q);
    let iq = synth::synthesize_aspc_iq_shared(&twin, &shared)?;
    Ok(MatchedFrames { twin, real, iq })
}

fn band_spectrum(frames: &RealCube, s: &RadarScenario, band_hi: f64) -> Result<PowerSpectrum> {
    let avg = s.processing.spectrum_averages.min(frames.chirps());
    spectra::power_spectrum(frames, s.processing.window, frames.samples(), avg)?
        .restricted(0.0, band_hi)
}

pub fn experiment_a(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut s = config.prepared_scenario();
    s.targets.clear();
    let m = matched_frames(&s, None)?;
    let calibration = CalibrationConfig::default();

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

    let band_hi = s.sampling.min_rate / 2.0;
    let sp_none = band_spectrum(&none, &s, band_hi)?;
    let sp_spc = band_spectrum(&spc_out, &s, band_hi)?;
    let sp_none_q = band_spectrum(&none_q, &m.twin, band_hi)?;
    let sp_aspc = band_spectrum(&aspc_out.output, &m.twin, band_hi)?;
    for other in [&sp_spc, &sp_none_q, &sp_aspc] {
        if other.len() != sp_none.len() {
            return Err(Error::AxisMismatch);
        }
    }

    let smooth = spectra::default_smoothing(sp_none.len());
    let curve_spc = spectra::improvement_curve(&sp_none, &sp_spc, smooth)?;
    let curve_aspc = spectra::improvement_curve(&sp_none_q, &sp_aspc, smooth)?;

    // lines at DC and at the leakage beat are not floor; skip them plus the
    // smoothing span
    let df = sp_none.bin_width();
    let leak_bin = (s.leakage.f_beat.abs() / df).round() as usize;
    let guard = leak_bin + 2 * smooth + 4;
    let n_sm = dsp::moving_average(&sp_none.power_db, smooth);
    let s_sm = dsp::moving_average(&sp_spc.power_db, smooth);
    let a_sm = dsp::moving_average(&sp_aspc.power_db, smooth);
    let bins = guard..sp_none.len();
    let mut worst_as = f64::INFINITY;
    let mut worst_sn = f64::INFINITY;
    for k in bins.clone() {
        worst_as = worst_as.min(s_sm[k] - a_sm[k]);
        worst_sn = worst_sn.min(n_sm[k] - s_sm[k]);
    }
    let ordered = worst_as >= 0.0 && worst_sn >= 0.0;

    let far = sp_none.band_bins(0.75 * band_hi, band_hi);
    let far_gap = median_of(far.clone().map(|k| s_sm[k] - a_sm[k]));
    let far_band = 0.75 * band_hi..=band_hi;
    let floor = |sp: &PowerSpectrum| {
        spectra::noise_floor(sp, far_band.clone(), spectra::DEFAULT_GUARD_BINS)
    };

    let mut report = Report::new("a", &s, config.scale);
    report.metric("bin_width_hz", df);
    report.metric("smoothing_bins", smooth as f64);
    report.metric("ordering_start_hz", guard as f64 * df);
    report.metric("far_floor_none_db", floor(&sp_none)?);
    report.metric("far_floor_spc_db", floor(&sp_spc)?);
    report.metric("far_floor_none_q_db", floor(&sp_none_q)?);
    report.metric("far_floor_aspc_db", floor(&sp_aspc)?);
    report.metric("far_gap_spc_minus_aspc_db", far_gap);
    report.metric("worst_margin_spc_minus_aspc_db", worst_as);
    report.metric("worst_margin_none_minus_spc_db", worst_sn);
    report.metric(
        "median_improvement_spc_db",
        median_of(bins.clone().map(|k| curve_spc[k])),
    );
    report.metric(
        "median_improvement_aspc_db",
        median_of(bins.clone().map(|k| curve_aspc[k])),
    );
    report.metric(
        "far_improvement_spc_db",
        median_of(far.clone().map(|k| curve_spc[k])),
    );
    report.metric(
        "far_improvement_aspc_db",
        median_of(far.map(|k| curve_aspc[k])),
    );
    report.metric("spc_mur_hz", spc::spc_mur(&s.sampling, &spc_est));
    report.metric(
        "leakage_phase_rms_rad",
        m.real.truth.leakage_phase_noise.rms,
    );
    report.claim(
        "floor_ordering",
        ordered,
        format!(
            "A-SPC <= SPC <= none on every smoothed bin above {:.0} Hz (worst margins {:.3} dB, {:.3} dB)",
            guard as f64 * df,
            worst_as,
            worst_sn
        ),
    );
    report.claim(
        "far_band_gap",
        far_gap > FAR_GAP_MIN_DB,
        format!("median SPC - A-SPC over the far quarter {far_gap:.3} dB > {FAR_GAP_MIN_DB} dB"),
    );

    let mut out = ExperimentOutput::new(report);
    out.curves.push(("spc".into(), sp_none.clone(), curve_spc));
    out.curves
        .push(("aspc".into(), sp_none_q.clone(), curve_aspc));
    out.spectra.push(("none".into(), sp_none));
    out.spectra.push(("spc".into(), sp_spc));
    out.spectra.push(("none_q".into(), sp_none_q));
    out.spectra.push(("aspc".into(), sp_aspc));
    Ok(out)
}
