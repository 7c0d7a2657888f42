//! CSV tables with JSON metadata siblings, written atomically.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use tempfile::NamedTempFile;

use crate::config::{RunConfig, FORMAT_VERSION};
use crate::error::CliError;

/// A CSV table held in memory until it is written.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }
}

/// Shortest round-trip representation; locale independent.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    stem: &str,
    command: &str,
    config: &RunConfig,
    table: &Table,
    results: impl Serialize,
) -> Result<(PathBuf, PathBuf), CliError> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let meta = metadata(command, config, serde_json::to_value(results)?);
    let mut text = serde_json::to_vec_pretty(&meta)?;
    text.push(b'\n');
    write_atomic(&csv_path, &table.to_bytes()?)?;
    write_atomic(&json_path, &text)?;
    Ok((csv_path, json_path))
}

pub fn metadata(command: &str, config: &RunConfig, results: Value) -> Value {
    json!({
        "format_version": FORMAT_VERSION,
        "software": { "name": "tcsim", "version": env!("CARGO_PKG_VERSION") },
        "command": command,
        "units": "frequencies and rates in linear MHz (f = ω/2π)",
        "config": config,
        "results": results,
    })
}
