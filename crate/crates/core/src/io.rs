//! Persistence: JSON-lines posterior samples, JSON diagnostics and
//! manifests, CSV tables.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ResolvedRun, RunConfig};
use crate::error::{Error, Result};
use crate::sampler::{ChainOutput, Diagnostics, PosteriorSample};

/// One line of a samples file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub chain: usize,
    pub iter: u64,
    pub k: usize,
    pub labels: Vec<usize>,
    pub thetas: Vec<Vec<f64>>,
    pub log_lik: f64,
}

impl SampleRecord {
    pub fn new(chain: usize, s: &PosteriorSample) -> Self {
        Self {
            chain,
            iter: s.iter,
            k: s.k,
            labels: s.labels.clone(),
            thetas: s.thetas.clone(),
            log_lik: s.log_lik,
        }
    }

    pub fn into_sample(self) -> PosteriorSample {
        PosteriorSample {
            iter: self.iter,
            k: self.k,
            labels: self.labels,
            thetas: self.thetas,
            log_lik: self.log_lik,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.k == 0 || self.thetas.len() != self.k {
            return Err(format!("k = {} but {} coefficient vectors", self.k, self.thetas.len()));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.k) {
            return Err(format!("label {l} out of range for k = {}", self.k));
        }
        let d = self.thetas[0].len();
        if self.thetas.iter().any(|t| t.len() != d) {
            return Err("coefficient vectors differ in length".into());
        }
        Ok(())
    }
}

/// Writes every retained sample of every chain, one JSON object per line.
pub fn write_samples<W: Write>(mut writer: W, chains: &[ChainOutput]) -> Result<()> {
    for c in chains {
        for s in &c.samples {
            serde_json::to_writer(&mut writer, &SampleRecord::new(c.chain, s))?;
            writer.write_all(b"\n")?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Reads a samples file; blank lines are skipped.
pub fn read_samples<R: Read>(reader: R) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord = serde_json::from_str(&line).map_err(|e| Error::Record {
            line: i + 1,
            msg: e.to_string(),
        })?;
        rec.validate().map_err(|msg| Error::Record { line: i + 1, msg })?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::Invalid("samples file has no samples".into()));
    }
    Ok(out)
}

pub fn read_samples_file(path: impl AsRef<Path>) -> Result<Vec<PosteriorSample>> {
    let f = std::fs::File::open(path)?;
    Ok(read_samples(f)?.into_iter().map(SampleRecord::into_sample).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub birth: f64,
    pub death: f64,
    pub change: f64,
    pub hyper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub n_samples: usize,
    pub acceptance: AcceptanceRates,
    #[serde(flatten)]
    pub diagnostics: Diagnostics,
}

impl ChainDiagnostics {
    pub fn new(c: &ChainOutput) -> Self {
        let d = &c.diagnostics;
        Self {
            chain: c.chain,
            n_samples: c.samples.len(),
            acceptance: AcceptanceRates {
                birth: d.birth.acceptance_rate(),
                death: d.death.acceptance_rate(),
                change: d.change.acceptance_rate(),
                hyper: d.hyper.acceptance_rate(),
            },
            diagnostics: d.clone(),
        }
    }
}

/// Everything needed to reproduce a fit exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub version: String,
    pub data: PathBuf,
    pub config: RunConfig,
    pub resolved: ResolvedRun,
    pub n_input: usize,
    pub n_kept: usize,
    pub n_blocks: usize,
}

impl FitManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes serializable rows as CSV with a header.
pub fn write_csv_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Invalid(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
