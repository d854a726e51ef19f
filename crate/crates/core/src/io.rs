//! Prediction file formats.
//!
//! **CALP** (binary, little-endian):
//!
//! | offset        | size      | field                            |
//! |---------------|-----------|----------------------------------|
//! | 0             | 4         | magic `CALP`                     |
//! | 4             | 4 (u32)   | version, always 1                |
//! | 8             | 8 (u64)   | sample count `n`                 |
//! | 16            | 8 (u64)   | class count `C`                  |
//! | 24            | 4·n·C     | f32 scores, row-major            |
//! | 24 + 4·n·C    | 4·n       | u32 labels                       |
//!
//! **CSV**: header `logit_0,...,logit_{C-1},label`, one sample per line.
//!
//! Readers detect CALP by its magic bytes and CSV by the `.csv` extension.
//! Scores hold logits or probabilities; which one is chosen by the caller
//! ([`Content`]), typically from a manifest entry.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::PredictionSet;

pub const CALP_MAGIC: &[u8; 4] = b"CALP";
pub const CALP_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Calp,
    Csv,
}

impl Format {
    /// CSV for a `.csv` extension, CALP otherwise.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Calp,
        }
    }
}

/// What the stored scores are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Content {
    #[default]
    Logits,
    /// Probabilities; converted to log-scores on load.
    Probabilities,
}

fn build(
    path: &Path,
    scores: Vec<f64>,
    classes: usize,
    labels: Vec<usize>,
    content: Content,
) -> Result<PredictionSet> {
    let built = match content {
        Content::Logits => PredictionSet::new(scores, classes, labels),
        Content::Probabilities => PredictionSet::from_probabilities(&scores, classes, labels),
    };
    built.map_err(|e| match e {
        Error::Validation(msg) => Error::format(path, msg),
        other => other,
    })
}

/// Reads a prediction file, detecting the format.
pub fn read_predictions(path: &Path, content: Content) -> Result<PredictionSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_predictions_from(path, &bytes, None, content)
}

/// Reads a prediction file in an explicitly requested format.
pub fn read_predictions_as(path: &Path, format: Format, content: Content) -> Result<PredictionSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_predictions_from(path, &bytes, Some(format), content)
}

fn read_predictions_from(
    path: &Path,
    bytes: &[u8],
    format: Option<Format>,
    content: Content,
) -> Result<PredictionSet> {
    let is_calp = bytes.starts_with(CALP_MAGIC);
    let format = match format {
        Some(f) => f,
        None if is_calp => Format::Calp,
        None if Format::for_path(path) == Format::Csv => Format::Csv,
        None => {
            return Err(Error::format(
                path,
                "unrecognized prediction file: no CALP magic bytes and no .csv extension",
            ))
        }
    };
    match format {
        Format::Calp => decode_calp(path, bytes, content),
        Format::Csv => decode_csv(path, bytes, content),
    }
}

fn decode_calp(path: &Path, bytes: &[u8], content: Content) -> Result<PredictionSet> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            path,
            format!(
                "file is {} bytes, shorter than the {HEADER_LEN}-byte CALP header",
                bytes.len()
            ),
        ));
    }
    if &bytes[0..4] != CALP_MAGIC {
        return Err(Error::format(
            path,
            "bad magic bytes at offset 0 (expected `CALP`)",
        ));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CALP_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported CALP version {version} at offset 4"),
        ));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let classes = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = n
        .checked_mul(classes)
        .and_then(|nc| nc.checked_add(n))
        .and_then(|cells| cells.checked_mul(4))
        .and_then(|b| b.checked_add(HEADER_LEN as u64));
    if expected != Some(bytes.len() as u64) {
        return Err(Error::format(
            path,
            format!(
                "header declares n = {n}, C = {classes} but the file has {} bytes",
                bytes.len()
            ),
        ));
    }
    let (n, classes) = (n as usize, classes as usize);
    let scores_end = HEADER_LEN + 4 * n * classes;
    let scores = bytes[HEADER_LEN..scores_end]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    let labels = bytes[scores_end..]
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
        .collect();
    build(path, scores, classes, labels, content)
}

fn decode_csv(path: &Path, bytes: &[u8], content: Content) -> Result<PredictionSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, format!("unreadable CSV header: {e}")))?
        .clone();
    let classes = header.len().saturating_sub(1);
    let header_ok = header.len() >= 3
        && header.get(classes) == Some("label")
        && (0..classes).all(|k| header.get(k) == Some(format!("logit_{k}").as_str()));
    if !header_ok {
        return Err(Error::format(
            path,
            "CSV header must be `logit_0,...,logit_{C-1},label` with at least 2 classes",
        ));
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::format(path, format!("line {line}: {e}")))?;
        if record.len() != classes + 1 {
            return Err(Error::format(
                path,
                format!(
                    "line {line}: expected {} fields, found {}",
                    classes + 1,
                    record.len()
                ),
            ));
        }
        for k in 0..classes {
            let field = record[k].trim();
            let v: f64 = field.parse().map_err(|_| {
                Error::format(
                    path,
                    format!("line {line}, column {k}: `{field}` is not a number"),
                )
            })?;
            scores.push(v);
        }
        let field = record[classes].trim();
        let y: usize = field.parse().map_err(|_| {
            Error::format(
                path,
                format!("line {line}: label `{field}` is not a class index"),
            )
        })?;
        labels.push(y);
    }
    build(path, scores, classes, labels, content)
}

/// Encodes a set as CALP bytes. Scores are narrowed to f32.
pub fn encode_calp(set: &PredictionSet) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * (set.logits().len() + set.len()));
    out.extend_from_slice(CALP_MAGIC);
    out.extend_from_slice(&CALP_VERSION.to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    out.extend_from_slice(&(set.classes() as u64).to_le_bytes());
    for (k, &z) in set.logits().iter().enumerate() {
        let v = z as f32;
        if !v.is_finite() {
            return Err(Error::validation(format!(
                "score {z} at row {}, column {} does not fit in f32",
                k / set.classes(),
                k % set.classes()
            )));
        }
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &y in set.labels() {
        let y = u32::try_from(y)
            .map_err(|_| Error::validation(format!("label {y} does not fit in u32")))?;
        out.extend_from_slice(&y.to_le_bytes());
    }
    Ok(out)
}

/// Encodes a set as CSV text (LF line endings, full f64 precision).
pub fn encode_csv(set: &PredictionSet) -> Result<Vec<u8>> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header: Vec<String> = (0..set.classes()).map(|k| format!("logit_{k}")).collect();
    header.push("label".into());
    writer.write_record(&header).expect("writing to memory");
    for (row, &y) in set.rows().zip(set.labels()) {
        let mut fields: Vec<String> = row.iter().map(f64::to_string).collect();
        fields.push(y.to_string());
        writer.write_record(&fields).expect("writing to memory");
    }
    Ok(writer.into_inner().expect("flushing to memory"))
}

pub fn write_predictions(path: &Path, set: &PredictionSet, format: Format) -> Result<()> {
    let bytes = match format {
        Format::Calp => encode_calp(set)?,
        Format::Csv => encode_csv(set)?,
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
