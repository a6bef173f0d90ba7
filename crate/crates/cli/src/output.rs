//! Versioned CSV tables and run manifests.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Writes `rows` under a `# sjrp <table> schema v1` comment line.
pub fn write_table<R: Serialize>(path: &Path, table: &str, rows: &[R]) -> Result<()> {
    let mut file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "# sjrp {table} schema v{CSV_SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_table`], checking its schema line.
pub fn read_table<R: serde::de::DeserializeOwned>(path: &Path, table: &str) -> Result<Vec<R>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let expected = format!("# sjrp {table} schema v{CSV_SCHEMA_VERSION}");
    if first.trim_end() != expected {
        anyhow::bail!("{}: expected header `{expected}`, found `{first}`", path.display());
    }
    let mut r = csv::Reader::from_reader(rest.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<Vec<R>, _>>()?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub config_path: PathBuf,
    /// Hash of the resolved configuration, defaults included.
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub versions: Versions,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputFile>,
    pub wall_seconds: f64,
    /// Per-stage timings; kept out of the CSVs so those stay reproducible.
    pub timings: Vec<(String, f64)>,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub sjrp: &'static str,
    pub csv_schema: u32,
}

impl Versions {
    pub fn current() -> Self {
        Self { sjrp: env!("CARGO_PKG_VERSION"), csv_schema: CSV_SCHEMA_VERSION }
    }
}

pub fn hash_outputs(dir: &Path, files: &[PathBuf]) -> Result<Vec<OutputFile>> {
    files
        .iter()
        .map(|f| {
            let bytes = std::fs::read(dir.join(f)).with_context(|| format!("hashing {}", f.display()))?;
            Ok(OutputFile { path: f.clone(), sha256: sha256_hex(&bytes) })
        })
        .collect()
}
