//! Result files and per-cell summaries.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Algorithm, ResultRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json-lines" | "ndjson" => Ok(Format::Jsonl),
            other => Err(Error::InvalidParameter(format!(
                "unknown format `{other}` (expected csv or jsonl)"
            ))),
        }
    }
}

pub const CSV_HEADER: [&str; 16] = [
    "trial",
    "algorithm",
    "n",
    "m",
    "k",
    "l",
    "phi",
    "epsilon",
    "size",
    "tp",
    "fp",
    "tn",
    "fn",
    "ppv",
    "tpr",
    "fpr",
];

/// Rounds to six significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

fn rounded(row: &ResultRow) -> ResultRow {
    ResultRow {
        phi: round_sig6(row.phi),
        epsilon: row.epsilon.map(round_sig6),
        ppv: round_sig6(row.ppv),
        tpr: round_sig6(row.tpr),
        fpr: round_sig6(row.fpr),
        ..row.clone()
    }
}

/// Writes rows with floats rounded to six significant digits. A CSV file
/// always gets a header, even with no rows.
pub fn write_results(rows: &[ResultRow], path: &Path, format: Format) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    write_rows(rows, BufWriter::new(file), format, path)
}

/// Same as [`write_results`] but to any writer, e.g. stdout.
pub fn write_results_to<W: Write>(rows: &[ResultRow], writer: W, format: Format) -> Result<()> {
    write_rows(rows, writer, format, Path::new("<stream>"))
}

fn write_rows<W: Write>(rows: &[ResultRow], writer: W, format: Format, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.into(),
        source,
    };
    match format {
        Format::Csv => {
            let csv_err = |source| Error::Csv {
                path: path.into(),
                source,
            };
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(writer);
            w.write_record(CSV_HEADER).map_err(csv_err)?;
            for row in rows {
                w.serialize(rounded(row)).map_err(csv_err)?;
            }
            w.flush().map_err(io_err)?;
        }
        Format::Jsonl => {
            let mut w = writer;
            for row in rows {
                serde_json::to_writer(&mut w, &rounded(row)).map_err(|source| Error::Json {
                    path: path.into(),
                    source,
                })?;
                w.write_all(b"\n").map_err(io_err)?;
            }
            w.flush().map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn read_results(path: &Path, format: Format) -> Result<Vec<ResultRow>> {
    match format {
        Format::Csv => {
            let csv_err = |source| Error::Csv {
                path: path.into(),
                source,
            };
            let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
            r.deserialize().map(|row| row.map_err(csv_err)).collect()
        }
        Format::Jsonl => {
            let file = File::open(path).map_err(|source| Error::Io {
                path: path.into(),
                source,
            })?;
            let mut rows = Vec::new();
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|source| Error::Io {
                    path: path.into(),
                    source,
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                rows.push(serde_json::from_str(&line).map_err(|source| Error::Json {
                    path: path.into(),
                    source,
                })?);
            }
            Ok(rows)
        }
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat {
                mean: f64::NAN,
                sd: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Stat { mean, sd }
    }

    /// Standard error of the mean.
    pub fn se(&self, count: usize) -> f64 {
        self.sd / (count as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub l: usize,
    pub trials: usize,
    pub size: Stat,
    pub ppv: Stat,
    pub tpr: Stat,
    pub fpr: Stat,
}

/// Groups rows by mechanism and cell.
pub fn summarize(rows: &[ResultRow]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(usize, usize, usize, usize, Algorithm), Vec<&ResultRow>> =
        BTreeMap::new();
    for r in rows {
        groups
            .entry((r.n, r.m, r.k, r.l, r.algorithm))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((n, m, k, l, algorithm), rs)| {
            let stat =
                |f: fn(&ResultRow) -> f64| Stat::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            CellSummary {
                algorithm,
                n,
                m,
                k,
                l,
                trials: rs.len(),
                size: stat(|r| r.size as f64),
                ppv: stat(|r| r.ppv),
                tpr: stat(|r| r.tpr),
                fpr: stat(|r| r.fpr),
            }
        })
        .collect()
}
