//! CSV tables and metadata sidecars.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Read a numeric CSV with a header row; every row must have the same width.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    CliError::invalid(format!("{}: row {}: `{field}` is not a number", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        CliError::io(path, e)
    } else {
        CliError::invalid(format!("{}: {e}", path.display()))
    }
}

/// Streaming CSV writer using shortest round-trip number formatting.
pub struct TableWriter {
    path: PathBuf,
    inner: csv::Writer<File>,
}

impl TableWriter {
    pub fn create(path: &Path, header: &[String]) -> Result<Self, CliError> {
        let mut inner = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        inner.write_record(header).map_err(|e| csv_error(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn write_fields(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.inner.write_record(fields).map_err(|e| csv_error(&self.path, e))
    }

    pub fn write_numbers(&mut self, row: &[f64]) -> Result<(), CliError> {
        let fields: Vec<String> = row.iter().map(|v| number(*v)).collect();
        self.write_fields(&fields)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn number(v: f64) -> String {
    format!("{v:?}")
}

pub fn numbered(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}_{i}")).collect()
}

/// `out.csv` -> `out.csv.<suffix>`.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

#[derive(Serialize)]
pub struct Meta<'a, C: Serialize> {
    pub command: &'a str,
    pub config_hash: String,
    pub seed: u64,
    pub config: &'a C,
}

/// Write `value` as pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::invalid(e.to_string()))?;
    text.push('\n');
    let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

/// Sidecar `<path>.meta.json` with the config hash and seed.
pub fn write_meta<C: Serialize>(path: &Path, command: &str, config: &C, seed: u64) -> Result<(), CliError> {
    let text = serde_json::to_string(config).map_err(|e| CliError::invalid(e.to_string()))?;
    let meta = Meta {
        command,
        config_hash: crate::hash_text(&text),
        seed,
        config,
    };
    write_json(&with_suffix(path, "meta.json"), &meta)
}

pub fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::invalid(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(Path::new("<stdout>"), e)),
        _ => Ok(()),
    }
}
