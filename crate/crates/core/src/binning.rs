//! Confidence binning for calibration metrics and reliability diagrams.
//!
//! Two schemes are supported:
//!
//! - **equal-mass**: samples are sorted by `(confidence, original index)` and
//!   cut into `m` contiguous groups whose sizes differ by at most one, larger
//!   groups first. Identical confidences may straddle a boundary.
//! - **equal-width**: bin `j` covers `(j/m, (j+1)/m]`, with `0` in bin 0.
//!   Bins may be empty.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::{argmax, ProbMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinMode {
    EqualMass,
    EqualWidth,
}

impl fmt::Display for BinMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            BinMode::EqualMass => "equal-mass",
            BinMode::EqualWidth => "equal-width",
        })
    }
}

impl FromStr for BinMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal-mass" => Ok(BinMode::EqualMass),
            "equal-width" => Ok(BinMode::EqualWidth),
            other => Err(Error::validation(format!(
                "unknown bin mode `{other}` (expected equal-mass or equal-width)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinningScheme {
    pub mode: BinMode,
    /// Number of bins.
    pub m: usize,
}

impl Default for BinningScheme {
    /// 15 equal-mass bins.
    fn default() -> Self {
        Self::equal_mass(15)
    }
}

impl BinningScheme {
    pub fn equal_mass(m: usize) -> Self {
        Self {
            mode: BinMode::EqualMass,
            m,
        }
    }

    pub fn equal_width(m: usize) -> Self {
        Self {
            mode: BinMode::EqualWidth,
            m,
        }
    }
}

impl fmt::Display for BinningScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} x{}", self.mode, self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub count: usize,
    /// Mean top-label confidence; 0 for an empty bin.
    pub mean_confidence: f64,
    /// Fraction of correct predictions; 0 for an empty bin.
    pub mean_accuracy: f64,
}

impl BinStat {
    pub fn gap(&self) -> f64 {
        (self.mean_accuracy - self.mean_confidence).abs()
    }
}

/// Bin index for every sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinPartition {
    pub assignment: Vec<usize>,
    pub num_bins: usize,
}

/// Top-label confidence and predicted class for every row.
pub fn top_label(probs: &ProbMatrix) -> (Vec<f64>, Vec<usize>) {
    probs
        .rows()
        .map(|row| {
            let k = argmax(row);
            (row[k], k)
        })
        .unzip()
}

/// Assigns confidences in `[0, 1]` to bins.
pub fn partition(confidence: &[f64], scheme: BinningScheme) -> Result<BinPartition> {
    let m = scheme.m;
    let n = confidence.len();
    if m == 0 {
        return Err(Error::validation("bin count must be at least 1"));
    }
    if let Some(i) = confidence.iter().position(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::validation(format!(
            "confidence {} at sample {i} is outside [0, 1]",
            confidence[i]
        )));
    }
    let assignment = match scheme.mode {
        BinMode::EqualMass => {
            if m > n {
                return Err(Error::validation(format!(
                    "{m} equal-mass bins need at least {m} samples, got {n}"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| confidence[a].total_cmp(&confidence[b]).then(a.cmp(&b)));
            let (base, extra) = (n / m, n % m);
            let mut assignment = vec![0; n];
            let mut start = 0;
            for bin in 0..m {
                let size = base + usize::from(bin < extra);
                for &i in &order[start..start + size] {
                    assignment[i] = bin;
                }
                start += size;
            }
            assignment
        }
        BinMode::EqualWidth => confidence.iter().map(|&c| width_bin(c, m)).collect(),
    };
    Ok(BinPartition {
        assignment,
        num_bins: m,
    })
}

/// Bin `j` with `j/m < c <= (j+1)/m`; edges are compared as `j as f64 / m as f64`.
fn width_bin(c: f64, m: usize) -> usize {
    let mf = m as f64;
    let edge = |j: usize| j as f64 / mf;
    let mut j = ((c * mf).ceil() as usize).saturating_sub(1).min(m - 1);
    while j > 0 && c <= edge(j) {
        j -= 1;
    }
    while j + 1 < m && c > edge(j + 1) {
        j += 1;
    }
    j
}

impl BinPartition {
    /// Per-bin mean confidence and accuracy.
    pub fn stats(&self, confidence: &[f64], predicted: &[usize], labels: &[usize]) -> Vec<BinStat> {
        bin_stats(self, confidence, predicted, labels)
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_bins];
        for &b in &self.assignment {
            counts[b] += 1;
        }
        counts
    }
}

/// Per-bin statistics. Inputs must have the partition's length.
pub fn bin_stats(
    partition: &BinPartition,
    confidence: &[f64],
    predicted: &[usize],
    labels: &[usize],
) -> Vec<BinStat> {
    assert_eq!(partition.assignment.len(), confidence.len());
    assert_eq!(confidence.len(), predicted.len());
    assert_eq!(predicted.len(), labels.len());
    let m = partition.num_bins;
    let mut count = vec![0usize; m];
    let mut conf_sum = vec![0.0; m];
    let mut correct = vec![0usize; m];
    for (i, &b) in partition.assignment.iter().enumerate() {
        count[b] += 1;
        conf_sum[b] += confidence[i];
        correct[b] += usize::from(predicted[i] == labels[i]);
    }
    (0..m)
        .map(|b| {
            if count[b] == 0 {
                BinStat {
                    count: 0,
                    mean_confidence: 0.0,
                    mean_accuracy: 0.0,
                }
            } else {
                let k = count[b] as f64;
                BinStat {
                    count: count[b],
                    mean_confidence: conf_sum[b] / k,
                    mean_accuracy: correct[b] as f64 / k,
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn top_label_examples() {
        let p = ProbMatrix::new(vec![0.2, 0.5, 0.3], 3).unwrap();
        assert_eq!(top_label(&p), (vec![0.5], vec![1]));
        let p = ProbMatrix::new(vec![0.5, 0.5], 2).unwrap();
        assert_eq!(top_label(&p), (vec![0.5], vec![0]));
        let p = ProbMatrix::new(vec![0.25; 4], 4).unwrap();
        assert_eq!(top_label(&p), (vec![0.25], vec![0]));
    }

    #[test]
    fn equal_mass_two_bins_of_five() {
        let conf: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let p = partition(&conf, BinningScheme::equal_mass(2)).unwrap();
        assert_eq!(p.counts(), vec![5, 5]);
    }

    #[test]
    fn equal_mass_hand_sort() {
        let conf = [0.9, 0.55, 0.8, 0.6];
        let p = partition(&conf, BinningScheme::equal_mass(2)).unwrap();
        assert_eq!(p.assignment, vec![1, 0, 1, 0]);
    }

    #[test]
    fn equal_mass_larger_groups_first() {
        let conf = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        let p = partition(&conf, BinningScheme::equal_mass(3)).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn equal_mass_too_many_bins() {
        assert!(partition(&[0.5, 0.6], BinningScheme::equal_mass(3)).is_err());
    }

    #[test]
    fn equal_width_interval_rule() {
        let p = partition(&[0.05, 0.55, 0.95], BinningScheme::equal_width(2)).unwrap();
        assert_eq!(p.assignment, vec![0, 1, 1]);
        // Right-closed edges, zero in the first bin.
        let p = partition(&[0.0, 0.5, 1.0, 0.3], BinningScheme::equal_width(10)).unwrap();
        assert_eq!(p.assignment, vec![0, 4, 9, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(partition(&[0.5], BinningScheme::equal_width(0)).is_err());
        assert!(partition(&[1.5], BinningScheme::equal_width(3)).is_err());
    }

    #[test]
    fn stats_examples() {
        let part = BinPartition {
            assignment: vec![0, 0, 1, 1],
            num_bins: 3,
        };
        let conf = [0.8, 0.9, 0.55, 0.6];
        let pred = [0, 0, 0, 0];
        let labels = [0, 0, 0, 1];
        let s = part.stats(&conf, &pred, &labels);
        assert_abs_diff_eq!(s[0].mean_confidence, 0.85, epsilon = 1e-15);
        assert_eq!(s[0].mean_accuracy, 1.0);
        assert_abs_diff_eq!(s[1].mean_confidence, 0.575, epsilon = 1e-15);
        assert_eq!(s[1].mean_accuracy, 0.5);
        assert_eq!(s[2].count, 0);
    }

    proptest! {
        #[test]
        fn counts_sum_and_mass_balance(conf in prop::collection::vec(0.0f64..=1.0, 1..200), m in 1usize..20) {
            let width = partition(&conf, BinningScheme::equal_width(m)).unwrap();
            prop_assert_eq!(width.counts().iter().sum::<usize>(), conf.len());
            for (c, &b) in conf.iter().zip(&width.assignment) {
                prop_assert!(*c <= (b + 1) as f64 / m as f64);
                prop_assert!(b == 0 || *c > b as f64 / m as f64);
            }
            if m <= conf.len() {
                let mass = partition(&conf, BinningScheme::equal_mass(m)).unwrap();
                let counts = mass.counts();
                prop_assert_eq!(counts.iter().sum::<usize>(), conf.len());
                let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
        }

        #[test]
        fn singleton_bins_when_m_equals_n(conf in prop::collection::vec(0.0f64..=1.0, 1..50)) {
            let n = conf.len();
            let part = partition(&conf, BinningScheme::equal_mass(n)).unwrap();
            let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
            let pred = vec![0; n];
            for s in part.stats(&conf, &pred, &labels) {
                prop_assert_eq!(s.count, 1);
                prop_assert!(s.mean_accuracy == 0.0 || s.mean_accuracy == 1.0);
            }
        }

        #[test]
        fn stats_permutation_invariant(
            conf in prop::collection::hash_set(0u32..1_000_000, 2..60),
            m in 1usize..8,
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let conf: Vec<f64> = conf.into_iter().map(|c| c as f64 / 1e6).collect();
            let n = conf.len();
            prop_assume!(m <= n);
            let labels: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % 2).collect();
            let pred = vec![0; n];
            let scheme = BinningScheme::equal_mass(m);
            let base = partition(&conf, scheme).unwrap().stats(&conf, &pred, &labels);

            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let c2: Vec<f64> = perm.iter().map(|&i| conf[i]).collect();
            let l2: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
            let permuted = partition(&c2, scheme).unwrap().stats(&c2, &pred, &l2);
            // Bins are in confidence order, so they line up; sums may be
            // accumulated in a different order.
            for (a, b) in base.iter().zip(&permuted) {
                prop_assert_eq!(a.count, b.count);
                prop_assert_eq!(a.mean_accuracy, b.mean_accuracy);
                prop_assert!((a.mean_confidence - b.mean_confidence).abs() < 1e-12);
            }
        }
    }
}
