//! Prediction data model: logits, labels, probability matrices and splits.
//!
//! Everything downstream consumes a [`PredictionSet`]. Sets are validated on
//! construction, so a value of that type always satisfies:
//! at least one sample, at least two classes, every label below the class
//! count and every logit finite.
//!
//! Random splits use ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`)
//! followed by a Fisher-Yates shuffle of `0..n`. The ChaCha stream is
//! specified independently of platform word size and endianness, so a seed
//! selects the same partition everywhere.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums for [`ProbMatrix`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Smallest probability used when turning probabilities into log-scores.
pub const LOG_FLOOR: f64 = 1e-300;

/// Index of the largest entry. Ties go to the lowest index.
///
/// Panics on an empty slice.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax with max-subtraction. Fails on empty or non-finite input.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::validation("softmax of an empty vector"));
    }
    if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(format!(
            "softmax input entry {i} is not finite ({})",
            logits[i]
        )));
    }
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, 1.0, &mut out);
    Ok(out)
}

/// `softmax(logits / temperature)` written into `out`. Inputs must be finite.
pub(crate) fn softmax_into(logits: &[f64], temperature: f64, out: &mut [f64]) {
    let max = logits[argmax(logits)];
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = ((z - max) / temperature).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Outcome of checking raw prediction data against the [`PredictionSet`]
/// invariants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub classes: usize,
    /// Number of labels `>= classes`.
    pub label_violations: usize,
    /// First offending row and its label.
    pub first_bad_label: Option<(usize, usize)>,
    pub non_finite: usize,
    /// First non-finite logit as `(row, column)`.
    pub first_non_finite: Option<(usize, usize)>,
    /// Shape problems (empty set, too few classes, length mismatch).
    pub shape_errors: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.label_violations == 0 && self.non_finite == 0 && self.shape_errors.is_empty()
    }

    /// Human-readable description of the first problem, if any.
    pub fn first_problem(&self) -> Option<String> {
        if let Some(e) = self.shape_errors.first() {
            return Some(e.clone());
        }
        if let Some((row, col)) = self.first_non_finite {
            return Some(format!("non-finite logit at row {row}, column {col}"));
        }
        if let Some((row, label)) = self.first_bad_label {
            return Some(format!(
                "label {label} at row {row} is out of range for {} classes",
                self.classes
            ));
        }
        None
    }
}

/// Checks row-major `logits` (n x classes) and `labels` against the
/// prediction-set invariants. Never fails; problems are reported.
pub fn validate(logits: &[f64], classes: usize, labels: &[usize]) -> ValidationReport {
    let n = labels.len();
    let mut report = ValidationReport {
        n,
        classes,
        label_violations: 0,
        first_bad_label: None,
        non_finite: 0,
        first_non_finite: None,
        shape_errors: Vec::new(),
    };
    if n == 0 {
        report.shape_errors.push("prediction set is empty".into());
    }
    if classes < 2 {
        report
            .shape_errors
            .push(format!("need at least 2 classes, got {classes}"));
    }
    if classes == 0 || logits.len() != n * classes {
        report.shape_errors.push(format!(
            "logit count {} does not match {n} samples x {classes} classes",
            logits.len()
        ));
        return report;
    }
    for (i, &y) in labels.iter().enumerate() {
        if y >= classes {
            report.label_violations += 1;
            report.first_bad_label.get_or_insert((i, y));
        }
    }
    for (k, v) in logits.iter().enumerate() {
        if !v.is_finite() {
            report.non_finite += 1;
            report
                .first_non_finite
                .get_or_insert((k / classes, k % classes));
        }
    }
    report
}

/// Per-sample logits (row-major, `n x classes`) with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    logits: Vec<f64>,
    classes: usize,
    labels: Vec<usize>,
}

impl PredictionSet {
    pub fn new(logits: Vec<f64>, classes: usize, labels: Vec<usize>) -> Result<Self> {
        let report = validate(&logits, classes, &labels);
        if let Some(problem) = report.first_problem() {
            return Err(Error::Validation(problem));
        }
        Ok(Self {
            logits,
            classes,
            labels,
        })
    }

    /// Builds a set from stored probabilities by taking logs.
    ///
    /// Entries are floored at [`LOG_FLOOR`] so zeros stay finite. Softmax of
    /// the resulting log-scores reproduces the (renormalized) probabilities,
    /// so every calibrator can run on such data; temperature scaling then
    /// acts on log-probabilities instead of true logits.
    pub fn from_probabilities(probs: &[f64], classes: usize, labels: Vec<usize>) -> Result<Self> {
        if let Some(k) = probs
            .iter()
            .position(|p| !p.is_finite() || *p < 0.0 || *p > 1.0)
        {
            let classes = classes.max(1);
            return Err(Error::validation(format!(
                "probability at row {}, column {} is outside [0, 1] ({})",
                k / classes,
                k % classes,
                probs[k]
            )));
        }
        let logits = probs.iter().map(|p| p.max(LOG_FLOOR).ln()).collect();
        Self::new(logits, classes, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Row-major logits.
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.logits[i * self.classes..(i + 1) * self.classes]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.logits.chunks_exact(self.classes)
    }

    /// The validation report for this (necessarily valid) set.
    pub fn validate(&self) -> ValidationReport {
        validate(&self.logits, self.classes, &self.labels)
    }

    /// Plain softmax of every row.
    pub fn probabilities(&self) -> ProbMatrix {
        self.tempered_probabilities(1.0)
    }

    /// `softmax(logits / temperature)` of every row.
    pub(crate) fn tempered_probabilities(&self, temperature: f64) -> ProbMatrix {
        let mut probs = vec![0.0; self.logits.len()];
        for (row, out) in self
            .logits
            .chunks_exact(self.classes)
            .zip(probs.chunks_exact_mut(self.classes))
        {
            softmax_into(row, temperature, out);
        }
        ProbMatrix {
            probs,
            classes: self.classes,
        }
    }

    /// Copy with every logit multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.logits.iter().map(|z| z * factor).collect(),
            self.classes,
            self.labels.clone(),
        )
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut logits = Vec::with_capacity(indices.len() * self.classes);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::validation(format!(
                    "row index {i} out of range for {} samples",
                    self.len()
                )));
            }
            logits.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(logits, self.classes, labels)
    }

    /// Drops the rows listed in `excluded` (duplicates are ignored).
    pub fn without(&self, excluded: &[usize]) -> Result<Self> {
        let mut keep = vec![true; self.len()];
        for &i in excluded {
            if i >= self.len() {
                return Err(Error::validation(format!(
                    "excluded row {i} out of range for {} samples",
                    self.len()
                )));
            }
            keep[i] = false;
        }
        let indices: Vec<usize> = (0..self.len()).filter(|&i| keep[i]).collect();
        self.select(&indices)
    }

    /// Seeded calibration/test split; see [`split_indices`].
    pub fn split(&self, spec: &SplitSpec) -> Result<(Self, Self)> {
        let (cal, test) = split_indices(self.len(), spec)?;
        Ok((self.select(&cal)?, self.select(&test)?))
    }
}

/// Row-stochastic `n x classes` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    probs: Vec<f64>,
    classes: usize,
}

impl ProbMatrix {
    /// Validates entries in `[0, 1]` and row sums within [`SIMPLEX_TOLERANCE`].
    pub fn new(probs: Vec<f64>, classes: usize) -> Result<Self> {
        if classes == 0 || probs.is_empty() || !probs.len().is_multiple_of(classes) {
            return Err(Error::validation(format!(
                "{} probabilities cannot form rows of {classes} classes",
                probs.len()
            )));
        }
        for (i, row) in probs.chunks_exact(classes).enumerate() {
            if let Some(j) = row
                .iter()
                .position(|p| !p.is_finite() || *p < 0.0 || *p > 1.0)
            {
                return Err(Error::validation(format!(
                    "probability at row {i}, column {j} is outside [0, 1] ({})",
                    row[j]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Error::validation(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(Self { probs, classes })
    }

    /// For transforms that produce simplex rows by construction.
    pub(crate) fn from_rows_unchecked(probs: Vec<f64>, classes: usize) -> Self {
        debug_assert!(probs.len().is_multiple_of(classes));
        Self { probs, classes }
    }

    pub fn len(&self) -> usize {
        self.probs.len() / self.classes
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.classes..(i + 1) * self.classes]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.probs.chunks_exact(self.classes)
    }

    /// Predicted class per row (lowest index on ties).
    pub fn predicted(&self) -> Vec<usize> {
        self.rows().map(argmax).collect()
    }

    /// Log-probabilities as a prediction set, for writing calibrated output
    /// back into the prediction file formats.
    pub fn to_log_scores(&self, labels: Vec<usize>) -> Result<PredictionSet> {
        PredictionSet::from_probabilities(&self.probs, self.classes, labels)
    }
}

/// Calibration/test split parameters. The default is a 90/10 test/calibration
/// split with seed 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of samples in the test part; the rest is for calibration.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.9,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn calibration_fraction(&self) -> f64 {
        1.0 - self.test_fraction
    }
}

/// Returns `(calibration, test)` index sets, each sorted ascending.
///
/// The test part has `round(test_fraction * n)` samples. Both parts must be
/// non-empty.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::validation(format!(
            "test fraction must lie in (0, 1), got {}",
            spec.test_fraction
        )));
    }
    let n_test = (spec.test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::validation(format!(
            "{n} samples cannot be split into non-empty parts at test fraction {}",
            spec.test_fraction
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    perm.shuffle(&mut rng);
    let mut test = perm[..n_test].to_vec();
    let mut cal = perm[n_test..].to_vec();
    test.sort_unstable();
    cal.sort_unstable();
    Ok((cal, test))
}
