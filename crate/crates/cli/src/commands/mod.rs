use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gupmech::analysis::{track_spectral_peak, track_zero_crossings};
use gupmech::{FitResult, RingdownRecord, TimeSeries};
use serde::Serialize;

use crate::config::{RunSection, TrackerChoice};

pub mod analyze;
pub mod pendulum;
pub mod simulate;
pub mod summary;
pub mod sweep;

/// Stages that ran but did not converge. Empty means exit code 0.
#[derive(Debug, Default)]
pub struct Outcome {
    pub failed: Vec<String>,
}

impl Outcome {
    pub fn converged(&self) -> bool {
        self.failed.is_empty()
    }
}

/// Writes into one output directory, never over a file the command read.
pub struct Output {
    dir: PathBuf,
    protected: Vec<PathBuf>,
}

impl Output {
    pub fn create(dir: &Path, inputs: &[&Path]) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            protected: inputs.iter().filter_map(|p| p.canonicalize().ok()).collect(),
        })
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Ok(existing) = path.canonicalize() {
            if self.protected.contains(&existing) {
                bail!("refusing to overwrite input file {}", path.display());
            }
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_fit(&self, name: &str, fit: &FitResult) -> Result<PathBuf> {
        self.write(name, fit.to_toml_string()?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub name: String,
    pub converged: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Per-stage status of a pipeline run, written as `[[stage]]` tables.
#[derive(Debug, Default, Serialize)]
pub struct Stages {
    pub stage: Vec<Stage>,
}

impl Stages {
    pub fn fit(&mut self, name: &str, fit: &FitResult) {
        self.stage.push(Stage {
            name: name.into(),
            converged: fit.converged,
            notes: fit.diagnostics.clone(),
        });
    }

    pub fn ok(&mut self, name: &str) {
        self.stage.push(Stage {
            name: name.into(),
            converged: true,
            notes: Vec::new(),
        });
    }

    pub fn fail(&mut self, name: &str, why: impl std::fmt::Display) {
        self.stage.push(Stage {
            name: name.into(),
            converged: false,
            notes: vec![why.to_string()],
        });
    }

    pub fn outcome(&self) -> Outcome {
        Outcome {
            failed: self
                .stage
                .iter()
                .filter(|s| !s.converged)
                .map(|s| match s.notes.first() {
                    Some(n) => format!("{}: {n}", s.name),
                    None => s.name.clone(),
                })
                .collect(),
        }
    }
}

pub fn track(ts: &TimeSeries, run: &RunSection) -> gupmech::Result<RingdownRecord> {
    match run.tracker {
        TrackerChoice::Spectral => track_spectral_peak(ts, run.bin_duration, run.resolution_bandwidth),
        TrackerChoice::ZeroCrossing => track_zero_crossings(ts, run.bin_duration),
    }
}

/// Shortest round-trip form, in exponent notation.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))
}
