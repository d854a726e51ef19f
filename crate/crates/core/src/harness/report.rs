//! Deterministic report files.
//!
//! CSV uses RFC 4180 quoting, `.` as decimal separator and LF line endings;
//! floats are written in shortest round-trip form. JSON keys follow struct
//! field order. Identical inputs therefore produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{EvalResult, EvalRow, SweepResult};
use crate::error::{Error, Result};
use crate::metrics::{MetricReport, ReliabilityData};
use crate::TOOLKIT_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Something that can be written out as report files.
pub trait Report {
    /// File stem, e.g. `eval`.
    fn stem(&self) -> &'static str;
    fn to_json(&self) -> Vec<u8>;
    /// `(file name, contents)` pairs.
    fn to_csv(&self) -> Vec<(String, Vec<u8>)>;
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    toolkit_version: &'static str,
    kind: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

fn versioned_json<T: Serialize>(kind: &'static str, body: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&Versioned {
        toolkit_version: TOOLKIT_VERSION,
        kind,
        body,
    })
    .expect("reports always serialize");
    out.push(b'\n');
    out
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}

const ROW_PREFIX: [&str; 5] = ["model", "method", "entry", "corruption", "severity"];

fn row_header() -> Vec<&'static str> {
    ROW_PREFIX
        .iter()
        .chain(MetricReport::CSV_HEADER.iter())
        .chain(["delta_ece"].iter())
        .copied()
        .collect()
}

fn row_fields(r: &EvalRow) -> Vec<String> {
    let mut f = vec![
        r.model.clone(),
        r.method.to_string(),
        r.entry.clone(),
        r.corruption.clone().unwrap_or_default(),
        r.severity.map(|s| s.to_string()).unwrap_or_default(),
    ];
    f.extend(r.report.csv_fields());
    f.push(r.delta_ece.to_string());
    f
}

/// Per-bin CSV for one reliability diagram.
pub fn reliability_csv(data: &ReliabilityData) -> Vec<u8> {
    csv_bytes(
        &ReliabilityData::CSV_HEADER,
        data.rows.iter().map(|r| {
            vec![
                r.bin.to_string(),
                r.mean_confidence.to_string(),
                r.mean_accuracy.to_string(),
                r.count.to_string(),
            ]
        }),
    )
}

impl Report for EvalResult {
    fn stem(&self) -> &'static str {
        "eval"
    }

    fn to_json(&self) -> Vec<u8> {
        versioned_json("eval", self)
    }

    fn to_csv(&self) -> Vec<(String, Vec<u8>)> {
        let metrics = csv_bytes(&row_header(), self.rows.iter().map(row_fields));
        let mut header: Vec<&str> = vec!["model", "method", "entry", "mode", "m"];
        header.extend(ReliabilityData::CSV_HEADER);
        let bins = csv_bytes(
            &header,
            self.reliability.iter().flat_map(|rec| {
                rec.data.rows.iter().map(move |r| {
                    vec![
                        rec.model.clone(),
                        rec.method.to_string(),
                        rec.entry.clone(),
                        rec.data.scheme.mode.to_string(),
                        rec.data.scheme.m.to_string(),
                        r.bin.to_string(),
                        r.mean_confidence.to_string(),
                        r.mean_accuracy.to_string(),
                        r.count.to_string(),
                    ]
                })
            }),
        );
        vec![
            ("eval.csv".into(), metrics),
            ("reliability.csv".into(), bins),
        ]
    }
}

impl Report for SweepResult {
    fn stem(&self) -> &'static str {
        "sweep"
    }

    fn to_json(&self) -> Vec<u8> {
        versioned_json("sweep", self)
    }

    fn to_csv(&self) -> Vec<(String, Vec<u8>)> {
        let detail = csv_bytes(&row_header(), self.details.iter().map(row_fields));
        let header = [
            "model",
            "method",
            "severity",
            "corruptions",
            "accuracy",
            "ece",
            "mce",
            "rmsce",
            "root_brier",
            "nll",
            "delta_ece",
            "mode",
            "m",
        ];
        let means = csv_bytes(
            &header,
            self.severity_means.iter().map(|s| {
                vec![
                    s.model.clone(),
                    s.method.to_string(),
                    s.severity.to_string(),
                    s.corruptions.to_string(),
                    s.accuracy.to_string(),
                    s.ece.to_string(),
                    s.mce.to_string(),
                    s.rmsce.to_string(),
                    s.root_brier.to_string(),
                    s.nll.to_string(),
                    s.delta_ece.to_string(),
                    self.scheme.mode.to_string(),
                    self.scheme.m.to_string(),
                ]
            }),
        );
        vec![
            ("sweep_detail.csv".into(), detail),
            ("sweep_severity.csv".into(), means),
        ]
    }
}

/// Writes `report` into `dir` (created if missing) and returns the paths
/// written, in order.
pub fn emit(report: &dyn Report, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    for format in formats {
        match format {
            ReportFormat::Json => files.push((format!("{}.json", report.stem()), report.to_json())),
            ReportFormat::Csv => files.extend(report.to_csv()),
        }
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
