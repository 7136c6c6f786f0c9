//! Experiment orchestration: scenario preparation, the three reproduction
//! experiments, claim evaluation and report output.
//!
//! Every report carries the scenario hash, the seed and one verdict per
//! claim, as text and as JSON. Reports are deterministic: re-running a
//! configuration reproduces them byte for byte.

mod experiment_a;
mod experiment_b;
mod experiment_c;
pub mod paths;

pub use experiment_a::experiment_a;
pub use experiment_b::{experiment_b, imbalance_for_irr};
pub use experiment_c::experiment_c;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::RadarScenario;
use crate::spectra::{self, PowerSpectrum, RangeDopplerMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 64 chirps, everything else as configured.
    Desk,
    Full,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: RadarScenario,
    pub scale: Scale,
    /// Replaces the scenario seed when set.
    pub seed: Option<u64>,
    pub use_iq_correction: bool,
}

impl ExperimentConfig {
    pub fn new(scenario: RadarScenario) -> Self {
        Self {
            scenario,
            scale: Scale::Desk,
            seed: None,
            use_iq_correction: true,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        RadarScenario::preset(name).map(Self::new)
    }

    pub fn with_scale(mut self, scale: Scale) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Scenario with the seed override and the scale applied.
    pub fn prepared_scenario(&self) -> RadarScenario {
        let mut s = self.scenario.clone();
        if let Some(seed) = self.seed {
            s.defects.seed = seed;
        }
        match self.scale {
            Scale::Desk => s.desk_scaled(),
            Scale::Full => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub experiment: String,
    pub scenario: String,
    /// Scenario hash, 16 hex digits.
    pub scenario_hash: String,
    pub seed: u64,
    pub scale: Scale,
    pub metrics: BTreeMap<String, f64>,
    pub claims: Vec<Claim>,
}

impl Report {
    pub fn new(experiment: &str, scenario: &RadarScenario, scale: Scale) -> Self {
        Self {
            experiment: experiment.to_string(),
            scenario: scenario.name.clone(),
            scenario_hash: format!("{:016x}", scenario.hash()),
            seed: scenario.defects.seed,
            scale,
            metrics: BTreeMap::new(),
            claims: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn claim(&mut self, name: &str, passed: bool, detail: String) {
        self.claims.push(Claim {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    pub fn get_metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn get_claim(&self, name: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.claims.iter().all(|c| c.passed)
    }

    /// Human-readable form. Metrics are printed with three decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment {}", self.experiment);
        let _ = writeln!(out, "scenario   {} ({})", self.scenario, self.scenario_hash);
        let _ = writeln!(out, "seed       {}", self.seed);
        let _ = writeln!(out, "scale      {}", self.scale.as_str());
        let _ = writeln!(out, "metrics");
        for (k, v) in &self.metrics {
            let _ = writeln!(out, "  {k:<32} {v:.3}");
        }
        let _ = writeln!(out, "claims");
        for c in &self.claims {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "  {verdict} {:<28} {}", c.name, c.detail);
        }
        let _ = writeln!(
            out,
            "verdict    {}",
            if self.all_passed() { "PASS" } else { "FAIL" }
        );
        out
    }

    /// JSON form. Non-finite metrics become `null`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A report plus the spectra, curves and maps it was computed from.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: Report,
    pub spectra: Vec<(String, PowerSpectrum)>,
    /// Improvement curves on the axis of the paired spectrum.
    pub curves: Vec<(String, PowerSpectrum, Vec<f64>)>,
    pub maps: Vec<(String, RangeDopplerMap)>,
}

pub type ReportA = ExperimentOutput;
pub type ReportB = ExperimentOutput;
pub type ReportC = ExperimentOutput;

impl ExperimentOutput {
    fn new(report: Report) -> Self {
        Self {
            report,
            spectra: Vec::new(),
            curves: Vec::new(),
            maps: Vec::new(),
        }
    }

    /// Writes `report.txt`, `report.json` and one CSV per spectrum
    /// (`spectrum_<name>.csv`), curve (`improvement_<name>.csv`) and map
    /// (`rdmap_<name>.csv`) into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), self.report.to_text())?;
        std::fs::write(dir.join("report.json"), self.report.to_json())?;
        let create = |name: String| -> Result<BufWriter<File>> {
            Ok(BufWriter::new(File::create(dir.join(name))?))
        };
        for (name, s) in &self.spectra {
            spectra::write_spectrum_csv(s, create(format!("spectrum_{name}.csv"))?)?;
        }
        for (name, axis, curve) in &self.curves {
            spectra::write_curve_csv(axis, curve, create(format!("improvement_{name}.csv"))?)?;
        }
        for (name, map) in &self.maps {
            spectra::write_map_csv(map, create(format!("rdmap_{name}.csv"))?)?;
        }
        Ok(())
    }
}

/// Runs experiment `a`, `b` or `c`.
pub fn run_experiment(which: &str, config: &ExperimentConfig) -> Result<ExperimentOutput> {
    match which {
        "a" => experiment_a(config),
        "b" => experiment_b(config),
        "c" => experiment_c(config),
        other => Err(Error::Parse(format!("unknown experiment `{other}`"))),
    }
}

/// Default preset for each experiment.
pub fn default_preset(which: &str) -> Option<&'static str> {
    match which {
        "a" => Some("table1"),
        "b" => Some("table2"),
        "c" => Some("table3"),
        _ => None,
    }
}

/// Median of `values`, NaN when empty.
fn median_of(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    crate::dsp::median(&mut v).unwrap_or(f64::NAN)
}
