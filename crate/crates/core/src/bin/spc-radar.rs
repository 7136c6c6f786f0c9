use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spc_radar::runner::{self, ExperimentConfig, Scale};
use spc_radar::{aspc, iqcorr, spc, spectra, synth};
use spc_radar::{AnyFrame, Error, IqFrames, RadarScenario, RealCube, Result};

#[derive(Parser)]
#[command(
    name = "spc-radar",
    version,
    about = "FMCW beat-signal simulation with SPC and A-SPC leakage mitigation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario TOML file or preset name (table1, table2, table3).
    #[arg(long)]
    scenario: Option<String>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Shrink to 64 chirps (default).
    #[arg(long, conflicts_with = "full_scale")]
    desk_scale: bool,
    /// Use the scenario as written.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args, Clone)]
struct Input {
    /// Frame dump to process instead of synthesizing from the scenario.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Estimation FFT size; defaults to the scenario value, or 128 times the
    /// padded chirp length for dumps.
    #[arg(long)]
    nfft: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthPath {
    /// Real oversampled IF frame.
    Spc,
    /// I/Q pair for the scenario's architecture.
    Iq,
    /// Balanced complex reference.
    Balanced,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    A,
    B,
    C,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a frame and write it as a dump.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "spc")]
        path: SynthPath,
    },
    /// Run SPC on a real IF frame.
    RunSpc {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
    },
    /// Run A-SPC on an I/Q pair or complex frame.
    RunAspc {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        no_iq_correction: bool,
    },
    /// Estimate the quadrature imbalance of an I/Q pair.
    IqFit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
    },
    /// Averaged power spectrum of a frame, as CSV.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
    },
    /// Range-Doppler map of a frame, as CSV.
    Rdmap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
    },
    /// Run experiment a, b or c and write its report.
    Experiment {
        #[arg(value_enum)]
        which: Which,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        no_iq_correction: bool,
    },
    /// Check a scenario against the model rules.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn scale(&self) -> Scale {
        if self.full_scale {
            Scale::Full
        } else {
            Scale::Desk
        }
    }

    fn scenario_or(&self, default: &str) -> Result<RadarScenario> {
        let name = self.scenario.as_deref().unwrap_or(default);
        RadarScenario::load(name)
    }

    /// Loaded scenario with seed and scale applied.
    fn prepared(&self, default: &str) -> Result<RadarScenario> {
        let mut config = ExperimentConfig::new(self.scenario_or(default)?).with_scale(self.scale());
        config.seed = self.seed;
        Ok(config.prepared_scenario())
    }

    fn out_file(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }
}

fn default_nfft(samples: usize) -> usize {
    samples.next_power_of_two() * 128
}

/// Frame from `--input`, or synthesized with `synth_fn`; plus the FFT size.
fn frame_and_nfft(
    common: &Common,
    input: &Input,
    default_scenario: &str,
    synth_fn: impl Fn(&RadarScenario) -> Result<AnyFrame>,
) -> Result<(AnyFrame, Option<RadarScenario>, usize)> {
    if let Some(path) = &input.input {
        let frame = AnyFrame::load(path)?;
        let samples = match &frame {
            AnyFrame::Real(c) => c.samples(),
            AnyFrame::Complex(c) => c.samples(),
            AnyFrame::IqPair(p) => p.i.samples(),
        };
        Ok((
            frame,
            None,
            input.nfft.unwrap_or_else(|| default_nfft(samples)),
        ))
    } else {
        let s = common.prepared(default_scenario)?;
        let nfft = input.nfft.unwrap_or(s.processing.nfft_estimation);
        Ok((synth_fn(&s)?, Some(s), nfft))
    }
}

fn real_of(frame: AnyFrame) -> Result<RealCube> {
    match frame {
        AnyFrame::Real(c) => Ok(c),
        other => Err(Error::DimensionMismatch {
            expected: "real frame".into(),
            got: format!("{:?}", other.kind()),
        }),
    }
}

fn iq_of(frame: AnyFrame) -> Result<IqFrames> {
    match frame {
        AnyFrame::IqPair(p) => Ok(p),
        AnyFrame::Complex(c) => IqFrames::new(c.re(), c.im()),
        AnyFrame::Real(_) => Err(Error::DimensionMismatch {
            expected: "I/Q pair or complex frame".into(),
            got: "Real".into(),
        }),
    }
}

fn synth_any(s: &RadarScenario, path: SynthPath) -> Result<AnyFrame> {
    Ok(match path {
        SynthPath::Spc => AnyFrame::Real(synth::synth_spc_frames(s)?),
        SynthPath::Iq => AnyFrame::IqPair(synth::synthesize_iq(s)?.frames),
        SynthPath::Balanced => AnyFrame::Complex(synth::synth_balanced_frames(s)?),
    })
}

fn default_synth_path(s: &RadarScenario) -> SynthPath {
    if s.sampling.satisfies_quarter_point()
        && s.architecture == spc_radar::model::Architecture::Heterodyne
    {
        SynthPath::Spc
    } else {
        SynthPath::Iq
    }
}

fn report_written(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Synth { common, path } => {
            let s = common.prepared("table1")?;
            let frame = synth_any(&s, path)?;
            let file = common.out_file(&format!("{}.frames", s.name))?;
            frame.save(&file)?;
            report_written(&file);
            Ok(true)
        }
        Command::RunSpc { common, input } => {
            let (frame, scenario, nfft) =
                frame_and_nfft(&common, &input, "table1", |s| synth_any(s, SynthPath::Spc))?;
            let x = real_of(frame)?;
            let (y, est) = spc::run_spc_with_estimate(&x, nfft)?;
            let mean_f = est.f_hat.iter().sum::<f64>() / est.chirps() as f64;
            println!(
                "chirps {}  mean f_hat {:.3} Hz  weakest peak {:.1} dB",
                est.chirps(),
                mean_f,
                est.weakest_peak_db()
            );
            if let Some(s) = scenario {
                println!("SPC MUR {:.0} Hz", spc::spc_mur(&s.sampling, &est));
            }
            let file = common.out_file("spc.frames")?;
            AnyFrame::Real(y).save(&file)?;
            report_written(&file);
            Ok(true)
        }
        Command::RunAspc {
            common,
            input,
            no_iq_correction,
        } => {
            let (frame, _, nfft) = frame_and_nfft(&common, &input, "table3", |s| {
                Ok(AnyFrame::IqPair(synth::synthesize_iq(s)?.frames))
            })?;
            let iq = iq_of(frame)?;
            let out = aspc::run_aspc_detailed(
                &iq.i,
                &iq.q,
                nfft,
                !no_iq_correction,
                &Default::default(),
            )?;
            if let Some(est) = &out.imbalance {
                println!(
                    "imbalance A_E {:.6}  theta_E {:.6} rad",
                    est.amplitude, est.phase
                );
            }
            println!("A-SPC MUR {:.0} Hz", out.output.rate / 2.0);
            let file = common.out_file("aspc.frames")?;
            AnyFrame::Real(out.output).save(&file)?;
            report_written(&file);
            Ok(true)
        }
        Command::IqFit { common, input } => {
            let (frame, _, _) = frame_and_nfft(&common, &input, "table3", |s| {
                Ok(AnyFrame::IqPair(synth::synthesize_iq(s)?.frames))
            })?;
            let iq = iq_of(frame)?;
            let est = iqcorr::estimate_imbalance(&iq.i, &iq.q)?;
            let fit = &est.source_fit;
            println!("A_E        {:.9}", est.amplitude);
            println!("theta_E    {:.9} rad", est.phase);
            println!("IRR        {:.3} dB", iqcorr::irr(est.amplitude, est.phase));
            println!(
                "fit        {:?} after {} iterations, rms {:.3e}",
                fit.termination, fit.iterations, fit.geometric_rms
            );
            Ok(true)
        }
        Command::Spectrum { common, input } => {
            let (frame, scenario, _) = frame_and_nfft(&common, &input, "table1", |s| {
                synth_any(s, default_synth_path(s))
            })?;
            let window = scenario
                .as_ref()
                .map(|s| s.processing.window)
                .unwrap_or_default();
            let sp = match frame {
                AnyFrame::Real(c) => spectra::power_spectrum(&c, window, c.samples(), c.chirps())?,
                AnyFrame::Complex(c) => {
                    spectra::power_spectrum(&c, window, c.samples(), c.chirps())?
                }
                AnyFrame::IqPair(p) => {
                    let z = p.to_complex();
                    spectra::power_spectrum(&z, window, z.samples(), z.chirps())?
                }
            };
            println!("floor {:.2} dB over {} bins", sp.floor_estimate, sp.len());
            let file = common.out_file("spectrum.csv")?;
            spectra::write_spectrum_csv(&sp, BufWriter::new(File::create(&file)?))?;
            report_written(&file);
            Ok(true)
        }
        Command::Rdmap { common, input } => {
            let (frame, scenario, _) = frame_and_nfft(&common, &input, "table2", |s| {
                synth_any(s, default_synth_path(s))
            })?;
            let window = scenario
                .as_ref()
                .map(|s| s.processing.window)
                .unwrap_or_default();
            let map = match frame {
                AnyFrame::Real(c) => spectra::range_doppler_map(&c, window)?,
                AnyFrame::Complex(c) => spectra::range_doppler_map(&c, window)?,
                AnyFrame::IqPair(p) => spectra::range_doppler_map(&p.to_complex(), window)?,
            };
            println!("floor {:.2} dB, {} peaks", map.floor_db, map.peaks.len());
            for p in map.peaks.iter().take(5) {
                println!(
                    "  {:9.2} m  {:+8.3} m/s  {:7.2} dB  SNR {:6.2} dB",
                    p.range_m, p.velocity_mps, p.power_db, p.snr_db
                );
            }
            let file = common.out_file("rdmap.csv")?;
            spectra::write_map_csv(&map, BufWriter::new(File::create(&file)?))?;
            report_written(&file);
            Ok(true)
        }
        Command::Experiment {
            which,
            common,
            no_iq_correction,
        } => {
            let key = match which {
                Which::A => "a",
                Which::B => "b",
                Which::C => "c",
            };
            let default = runner::default_preset(key).expect("known experiment");
            let mut config =
                ExperimentConfig::new(common.scenario_or(default)?).with_scale(common.scale());
            config.seed = common.seed;
            config.use_iq_correction = !no_iq_correction;
            let out = runner::run_experiment(key, &config)?;
            let dir = common.out.join(format!("experiment_{key}"));
            out.write_to_dir(&dir)?;
            print!("{}", out.report.to_text());
            report_written(&dir);
            Ok(out.report.all_passed())
        }
        Command::Validate { common } => {
            let s = common.scenario_or("table1")?;
            let report = s.validate();
            println!("{report}");
            if report.is_valid() {
                let axes = s.axes()?;
                println!(
                    "{}",
                    serde_json::to_string_pretty(&axes).expect("axes serialize")
                );
            }
            Ok(report.is_valid())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
