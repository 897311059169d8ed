//! Measured relaxation rates and their canonical CSV form.
//!
//! The canonical format is one header line
//! `nv_id,sample,temperature_k,omega_s,omega_err_s,gamma_s,gamma_err_s`
//! followed by one row per measurement. Lines starting with `#` are comments
//! and are ignored on read. Floats are written in Rust's shortest round-trip
//! representation, so writing and re-reading a dataset reproduces every row
//! bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Tag that resolves to the embedded measured-rate table.
pub const BUILTIN_TAG: &str = "paper-table-s4";
/// Environment variable that redirects [`BUILTIN_TAG`] to a file on disk.
pub const BUILTIN_DATA_ENV: &str = "NVRELAX_BUILTIN_DATA";

pub const CSV_HEADER: [&str; 7] = [
    "nv_id",
    "sample",
    "temperature_k",
    "omega_s",
    "omega_err_s",
    "gamma_s",
    "gamma_err_s",
];

/// Accepted temperature range on ingestion, K.
pub const INGEST_TEMPERATURE_RANGE: (f64, f64) = (1.0, 2000.0);

const BUILTIN_CSV: &str = include_str!("../data/measured_rates.csv");

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    Validation { line: u64, message: String },
    #[error("invalid measurement: {0}")]
    InvalidRow(String),
    #[error("dataset is empty")]
    Empty,
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One temperature point: Ω ± σ and γ ± σ (1σ, s⁻¹).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMeasurement {
    pub nv_id: String,
    pub sample: String,
    pub temperature: f64,
    pub omega: f64,
    pub omega_err: f64,
    pub gamma: f64,
    pub gamma_err: f64,
}

impl RateMeasurement {
    pub fn new(
        nv_id: impl Into<String>,
        sample: impl Into<String>,
        temperature: f64,
        (omega, omega_err): (f64, f64),
        (gamma, gamma_err): (f64, f64),
    ) -> Result<Self, DatasetError> {
        let row = RateMeasurement {
            nv_id: nv_id.into(),
            sample: sample.into(),
            temperature,
            omega,
            omega_err,
            gamma,
            gamma_err,
        };
        row.validate().map_err(DatasetError::InvalidRow)?;
        Ok(row)
    }

    /// Structural checks shared by every construction path. Temperature range
    /// limits are only applied on file ingestion.
    fn validate(&self) -> Result<(), String> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(format!("temperature must be positive, got {}", self.temperature));
        }
        for (name, v) in [("omega", self.omega), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        for (name, v) in [("omega_err", self.omega_err), ("gamma_err", self.gamma_err)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be strictly positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Ordered measurement rows. Duplicate `(nv_id, temperature)` pairs are kept
/// as independent points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<RateMeasurement>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(rows: Vec<RateMeasurement>, provenance: impl Into<String>) -> Result<Self, DatasetError> {
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        for r in &rows {
            r.validate().map_err(DatasetError::InvalidRow)?;
        }
        Ok(Dataset {
            rows,
            provenance: provenance.into(),
        })
    }

    /// The embedded table of measured rates (53 rows, samples A and B).
    pub fn builtin() -> Dataset {
        parse_csv(BUILTIN_CSV, "embedded measured rates, samples A and B")
            .expect("embedded dataset is valid")
    }

    pub fn rows(&self) -> &[RateMeasurement] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct sample labels in sorted order.
    pub fn samples(&self) -> Vec<String> {
        let mut s: Vec<String> = self.rows.iter().map(|r| r.sample.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    /// Rows satisfying `keep`, with the same provenance.
    pub fn filtered(&self, keep: impl Fn(&RateMeasurement) -> bool) -> Result<Dataset, DatasetError> {
        Dataset::new(
            self.rows.iter().filter(|r| keep(r)).cloned().collect(),
            self.provenance.clone(),
        )
    }

    pub fn temperature_range(&self) -> (f64, f64) {
        self.rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.temperature), hi.max(r.temperature))
        })
    }

    /// Canonical CSV text (header plus rows, no comments).
    pub fn to_csv(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:?},{:?},{:?},{:?},{:?}",
                r.nv_id, r.sample, r.temperature, r.omega, r.omega_err, r.gamma, r.gamma_err
            );
        }
        out
    }

    /// SHA-256 of the canonical CSV text, hex encoded.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv().as_bytes()))
    }

    /// Order-independent checksum: identical for any permutation of the rows.
    pub fn content_checksum(&self) -> String {
        let mut lines: Vec<String> = self.to_csv().lines().skip(1).map(str::to_string).collect();
        lines.sort();
        hex::encode(Sha256::digest(lines.join("\n").as_bytes()))
    }
}

/// Parses canonical CSV text. Errors name the 1-based line and column.
pub fn parse_csv(text: &str, provenance: &str) -> Result<Dataset, DatasetError> {
    // Drop comments and blank lines here and keep each record's physical
    // line number; the reader would otherwise count only records.
    let kept: Vec<(u64, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| (i as u64 + 1, l))
        .collect();
    let physical = |reader_line: u64| {
        kept.get(reader_line.saturating_sub(1) as usize)
            .map_or(reader_line, |k| k.0)
    };
    let cleaned = kept.iter().map(|k| k.1).collect::<Vec<_>>().join("\n");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(cleaned.as_bytes());

    let mut header_seen = false;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = physical(e.position().map(|p| p.line()).unwrap_or(1));
            DatasetError::Parse {
                line,
                column: 1,
                message: e.to_string(),
            }
        })?;
        let line = physical(record.position().map(|p| p.line()).unwrap_or(1));
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if !header_seen {
            for (i, expected) in CSV_HEADER.iter().enumerate() {
                match record.get(i) {
                    Some(got) if got == *expected => {}
                    got => {
                        return Err(DatasetError::Parse {
                            line,
                            column: i + 1,
                            message: format!(
                                "expected header field `{expected}`, found `{}`",
                                got.unwrap_or("")
                            ),
                        })
                    }
                }
            }
            if record.len() != CSV_HEADER.len() {
                return Err(DatasetError::Parse {
                    line,
                    column: CSV_HEADER.len() + 1,
                    message: "unexpected extra header field".into(),
                });
            }
            header_seen = true;
            continue;
        }
        if record.len() != CSV_HEADER.len() {
            return Err(DatasetError::Parse {
                line,
                column: record.len().min(CSV_HEADER.len()) + 1,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), record.len()),
            });
        }
        let num = |col: usize| -> Result<f64, DatasetError> {
            let raw = &record[col];
            raw.parse::<f64>().map_err(|_| DatasetError::Parse {
                line,
                column: col + 1,
                message: format!("`{raw}` is not a number ({})", CSV_HEADER[col]),
            })
        };
        let row = RateMeasurement {
            nv_id: record[0].to_string(),
            sample: record[1].to_string(),
            temperature: num(2)?,
            omega: num(3)?,
            omega_err: num(4)?,
            gamma: num(5)?,
            gamma_err: num(6)?,
        };
        if row.nv_id.is_empty() || row.sample.is_empty() {
            return Err(DatasetError::Validation {
                line,
                message: "nv_id and sample must be non-empty".into(),
            });
        }
        row.validate()
            .map_err(|message| DatasetError::Validation { line, message })?;
        let (lo, hi) = INGEST_TEMPERATURE_RANGE;
        if !(lo..=hi).contains(&row.temperature) {
            return Err(DatasetError::Validation {
                line,
                message: format!("temperature {} K outside [{lo}, {hi}] K", row.temperature),
            });
        }
        rows.push(row);
    }
    if !header_seen {
        return Err(DatasetError::Parse {
            line: 1,
            column: 1,
            message: "missing header".into(),
        });
    }
    Dataset::new(rows, provenance)
}

/// Resolves a dataset from a file path or from [`BUILTIN_TAG`].
///
/// When [`BUILTIN_DATA_ENV`] is set, the builtin tag reads that file instead of
/// the embedded table.
pub fn load_dataset(source: &str) -> Result<Dataset, DatasetError> {
    if source == BUILTIN_TAG {
        return match std::env::var_os(BUILTIN_DATA_ENV) {
            Some(path) => read_csv_file(Path::new(&path)),
            None => Ok(Dataset::builtin()),
        };
    }
    read_csv_file(Path::new(source))
}

pub fn read_csv_file(path: &Path) -> Result<Dataset, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(&text, &path.display().to_string())
}
