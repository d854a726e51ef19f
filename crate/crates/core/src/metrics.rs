//! Calibration metrics and proper scoring rules.
//!
//! Binned metrics work on top-label confidence. With bin weights
//! `b_j = |B_j| / n` and gaps `g_j = |acc(B_j) - conf(B_j)|`:
//!
//! - ECE = `sum_j b_j g_j`
//! - MCE = `max_j g_j` over non-empty bins
//! - RMSCE = `sqrt(sum_j b_j g_j^2)`
//!
//! Empty bins carry zero weight. The root Brier score uses the full
//! probability vector against a one-hot label; NLL clips the true-class
//! probability at [`NLL_EPSILON`]. All sums run sequentially in sample or bin
//! order, so results do not depend on scheduling.

use serde::{Deserialize, Serialize};

use crate::binning::{partition, top_label, BinStat, BinningScheme};
use crate::error::{Error, Result};
use crate::prediction::{argmax, ProbMatrix};

pub const NLL_EPSILON: f64 = 1e-12;

fn check_aligned(probs: &ProbMatrix, labels: &[usize]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::validation(format!(
            "{} probability rows but {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if let Some(i) = labels.iter().position(|&y| y >= probs.classes()) {
        return Err(Error::validation(format!(
            "label {} at row {i} is out of range for {} classes",
            labels[i],
            probs.classes()
        )));
    }
    Ok(())
}

/// Per-bin statistics of the top-label confidences.
pub fn binned(probs: &ProbMatrix, labels: &[usize], scheme: BinningScheme) -> Result<Vec<BinStat>> {
    check_aligned(probs, labels)?;
    let (confidence, predicted) = top_label(probs);
    let part = partition(&confidence, scheme)?;
    Ok(part.stats(&confidence, &predicted, labels))
}

fn weighted_gap_sum(stats: &[BinStat], n: usize, power: i32) -> f64 {
    stats
        .iter()
        .filter(|s| s.count > 0)
        .map(|s| s.count as f64 / n as f64 * s.gap().powi(power))
        .sum()
}

fn max_gap(stats: &[BinStat]) -> f64 {
    stats
        .iter()
        .filter(|s| s.count > 0)
        .map(BinStat::gap)
        .fold(0.0, f64::max)
}

/// Expected calibration error.
pub fn ece(probs: &ProbMatrix, labels: &[usize], scheme: BinningScheme) -> Result<f64> {
    let stats = binned(probs, labels, scheme)?;
    Ok(weighted_gap_sum(&stats, labels.len(), 1))
}

/// Maximum calibration error (absolute gaps, non-empty bins only).
pub fn mce(probs: &ProbMatrix, labels: &[usize], scheme: BinningScheme) -> Result<f64> {
    Ok(max_gap(&binned(probs, labels, scheme)?))
}

/// Root-mean-square calibration error.
pub fn rmsce(probs: &ProbMatrix, labels: &[usize], scheme: BinningScheme) -> Result<f64> {
    let stats = binned(probs, labels, scheme)?;
    Ok(weighted_gap_sum(&stats, labels.len(), 2).sqrt())
}

/// `sqrt(mean_i sum_c (p_ic - y_ic)^2)` with one-hot `y`.
pub fn root_brier(probs: &ProbMatrix, labels: &[usize]) -> Result<f64> {
    check_aligned(probs, labels)?;
    let total: f64 = probs
        .rows()
        .zip(labels)
        .map(|(row, &y)| {
            row.iter()
                .enumerate()
                .map(|(c, &p)| {
                    let t = if c == y { 1.0 } else { 0.0 };
                    (p - t) * (p - t)
                })
                .sum::<f64>()
        })
        .sum();
    Ok((total / labels.len() as f64).sqrt())
}

/// Mean negative log of the true-class probability, clipped below at
/// [`NLL_EPSILON`].
pub fn nll(probs: &ProbMatrix, labels: &[usize]) -> Result<f64> {
    check_aligned(probs, labels)?;
    let total: f64 = probs
        .rows()
        .zip(labels)
        .map(|(row, &y)| -row[y].max(NLL_EPSILON).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
pub fn accuracy(probs: &ProbMatrix, labels: &[usize]) -> Result<f64> {
    check_aligned(probs, labels)?;
    let correct = probs
        .rows()
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// All metrics for one prediction set, tagged with sample count and scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub ece: f64,
    pub mce: f64,
    pub rmsce: f64,
    pub root_brier: f64,
    pub nll: f64,
    pub n: usize,
    pub scheme: BinningScheme,
}

impl MetricReport {
    /// Column names of [`MetricReport::csv_fields`], in order.
    pub const CSV_HEADER: [&'static str; 9] = [
        "accuracy",
        "ece",
        "mce",
        "rmsce",
        "root_brier",
        "nll",
        "n",
        "mode",
        "m",
    ];

    pub fn compute(probs: &ProbMatrix, labels: &[usize], scheme: BinningScheme) -> Result<Self> {
        let stats = binned(probs, labels, scheme)?;
        let n = labels.len();
        Ok(Self {
            accuracy: accuracy(probs, labels)?,
            ece: weighted_gap_sum(&stats, n, 1),
            mce: max_gap(&stats),
            rmsce: weighted_gap_sum(&stats, n, 2).sqrt(),
            root_brier: root_brier(probs, labels)?,
            nll: nll(probs, labels)?,
            n,
            scheme,
        })
    }

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.accuracy.to_string(),
            self.ece.to_string(),
            self.mce.to_string(),
            self.rmsce.to_string(),
            self.root_brier.to_string(),
            self.nll.to_string(),
            self.n.to_string(),
            self.scheme.mode.to_string(),
            self.scheme.m.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub bin: usize,
    pub mean_confidence: f64,
    pub mean_accuracy: f64,
    pub count: usize,
}

/// Plot-ready reliability-diagram data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityData {
    /// One row per bin, in bin order; empty bins included with count 0.
    pub rows: Vec<ReliabilityRow>,
    pub accuracy: f64,
    pub mean_confidence: f64,
    pub scheme: BinningScheme,
}

impl ReliabilityData {
    pub const CSV_HEADER: [&'static str; 4] = ["bin", "mean_confidence", "mean_accuracy", "count"];
}

pub fn reliability(
    probs: &ProbMatrix,
    labels: &[usize],
    scheme: BinningScheme,
) -> Result<ReliabilityData> {
    let stats = binned(probs, labels, scheme)?;
    let (confidence, _) = top_label(probs);
    let mean_confidence = confidence.iter().sum::<f64>() / confidence.len() as f64;
    Ok(ReliabilityData {
        rows: stats
            .iter()
            .enumerate()
            .map(|(bin, s)| ReliabilityRow {
                bin,
                mean_confidence: s.mean_confidence,
                mean_accuracy: s.mean_accuracy,
                count: s.count,
            })
            .collect(),
        accuracy: accuracy(probs, labels)?,
        mean_confidence,
        scheme,
    })
}
