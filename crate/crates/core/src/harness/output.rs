//! Output rows, CSV writers and readers, and the shipped reference fixture.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Published DCGAN numbers, labelled `source=paper`. Reference only.
pub const PAPER_REFERENCE_CSV: &str = include_str!("../../fixtures/paper_reference.csv");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub method: String,
    pub f: f64,
    pub m: usize,
    pub k: u64,
    pub final_f: f64,
    pub mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub seed: u64,
    pub method: String,
    pub f: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ReferenceRow {
    pub source: String,
    pub figure: String,
    pub dataset: String,
    pub method: String,
    pub f: f64,
    pub mse: f64,
    pub k: Option<u64>,
    pub eta: Option<f64>,
    pub beta: Option<f64>,
}

pub fn paper_reference() -> Result<Vec<ReferenceRow>> {
    read_rows(PAPER_REFERENCE_CSV.as_bytes())
}

pub fn read_rows<T: for<'de> Deserialize<'de>, R: std::io::Read>(input: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn read_csv_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    read_rows(fs::File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?)
}

pub fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Per-method means of the emitted rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodSummary {
    pub n: usize,
    pub mean_mse: f64,
    pub mean_final_f: f64,
}

pub fn summarize<'a>(rows: impl IntoIterator<Item = &'a ResultRow>) -> BTreeMap<String, MethodSummary> {
    let mut acc: BTreeMap<String, (usize, f64, f64)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry(r.method.clone()).or_default();
        e.0 += 1;
        e.1 += r.mse;
        e.2 += r.final_f;
    }
    acc.into_iter()
        .map(|(k, (n, mse, f))| {
            (
                k,
                MethodSummary {
                    n,
                    mean_mse: mse / n as f64,
                    mean_final_f: f / n as f64,
                },
            )
        })
        .collect()
}

/// Output directory; all writes go through here from a single thread.
#[derive(Clone, Debug)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(OutputDir { root })
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::Config(format!("output directory {} does not exist", root.display())));
        }
        Ok(OutputDir { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        fs::write(self.path(name), bytes)?;
        Ok(())
    }

    pub fn write_rows<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        self.write(name, rows_to_csv(rows)?)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn read_rows<T: for<'de> Deserialize<'de>>(&self, name: &str) -> Result<Vec<T>> {
        read_csv_file(&self.path(name))
    }

    /// File names in the directory matching `prefix*suffix`, sorted.
    pub fn list(&self, prefix: &str, suffix: &str) -> Result<Vec<String>> {
        let mut names: Vec<String> = fs::read_dir(&self.root)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.starts_with(prefix) && n.ends_with(suffix))
            .collect();
        names.sort();
        Ok(names)
    }
}
