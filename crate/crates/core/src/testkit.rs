//! Small scenarios for unit tests. Every tone lands on an integer number of
//! cycles in the kept window.

use crate::model::*;

/// 4 MHz real IF plan: F_s = 1 MHz, Q = 4, IF at 1 MHz, 1024 kept samples
/// (bin width 3906.25 Hz), leakage 4 bins above the IF.
pub fn small_heterodyne() -> RadarScenario {
    RadarScenario {
        name: "small-het".into(),
        architecture: Architecture::Heterodyne,
        thermal_noise_db_hz: None,
        sweep: SweepParams {
            f_start: 14.35e9,
            bandwidth: 150e6,
            sweep_period: 1100.0 / 4e6,
            samples_per_chirp: 1100,
            samples_kept: 1024,
            chirps: 8,
        },
        sampling: SamplingPlan::spc(1e6, Ratio::new(4, 1), 0),
        processing: ProcessingParams {
            nfft_estimation: 1024 * 128,
            window: WindowKind::Hann,
            spectrum_averages: 8,
        },
        defects: OscillatorDefects {
            seed: 7,
            ..Default::default()
        },
        leakage: LeakageSpec {
            amplitude: 1.0,
            f_beat: 4.0 * 3906.25,
            theta: 0.3,
            phase_noise: PhaseNoiseSpec::none(),
        },
        targets: Vec::new(),
        imbalance: ImbalanceSpec::default(),
        metadata: None,
    }
}

/// Quadrature twin of [`small_heterodyne`] at 1 MHz, IF at 250 kHz.
pub fn small_quadrature() -> RadarScenario {
    small_heterodyne().quadrature_twin(250e3).unwrap()
}

/// Homodyne baseband plan at 1 MHz with 256 kept samples.
pub fn small_homodyne() -> RadarScenario {
    let mut s = small_heterodyne();
    s.name = "small-bb".into();
    s.architecture = Architecture::Homodyne;
    s.sweep.samples_per_chirp = 275;
    s.sweep.samples_kept = 256;
    s.sampling = SamplingPlan::aspc(1e6, 0.0);
    s.processing.nfft_estimation = 256 * 128;
    s
}

/// Range of a target whose beat is `bins` FFT bins of the kept window.
pub fn range_for_bins(s: &RadarScenario, bins: f64) -> f64 {
    let bin = s.rate() / s.sweep.samples_kept as f64;
    bins * bin * s.sweep.range_per_hz()
}
