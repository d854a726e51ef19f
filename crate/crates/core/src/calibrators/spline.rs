use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::binning::top_label;
use crate::error::{Error, Result};
use crate::prediction::{PredictionSet, ProbMatrix};

pub const DEFAULT_KNOTS: usize = 7;
/// Calibrated top-label probabilities are kept in `[EPS, 1 - EPS]`.
pub const SPLINE_EPSILON: f64 = 1e-6;

/// Cubic regression spline on the top-label confidence.
///
/// `coefficients[j]` holds `[c0, c1, c2, c3]` of the piece on
/// `[knots[j], knots[j + 1]]` in the local variable `t = x - knots[j]`.
/// Inputs outside the knot range are clamped to it and outputs to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineModel {
    pub knots: Vec<f64>,
    pub coefficients: Vec<[f64; 4]>,
}

impl SplineModel {
    /// The identity map on `[0, 1]`.
    pub fn identity() -> Self {
        Self {
            knots: vec![0.0, 1.0],
            coefficients: vec![[0.0, 1.0, 0.0, 0.0]],
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.knots.len() < 2
            || self.coefficients.len() + 1 != self.knots.len()
            || !self.knots.windows(2).all(|w| w[0] < w[1])
            || self.knots.iter().any(|k| !k.is_finite())
            || self.coefficients.iter().flatten().any(|c| !c.is_finite())
        {
            return Err(Error::validation(
                "spline needs strictly increasing finite knots and one coefficient set per interval",
            ));
        }
        Ok(())
    }

    /// Fits on `(confidence, correct)` top-label pairs of `softmax(logits)`
    /// with [`DEFAULT_KNOTS`] knots.
    pub fn fit(cal: &PredictionSet) -> Result<Self> {
        Self::fit_with_knots(cal, DEFAULT_KNOTS)
    }

    pub fn fit_with_knots(cal: &PredictionSet, knots: usize) -> Result<Self> {
        let (confidence, predicted) = top_label(&cal.probabilities());
        let correct: Vec<bool> = predicted
            .iter()
            .zip(cal.labels())
            .map(|(p, y)| p == y)
            .collect();
        Self::fit_pairs(&confidence, &correct, knots)
    }

    /// Least-squares cubic spline through `(confidence, correct)` with knots
    /// at equal-mass quantiles of the confidences.
    ///
    /// The basis is `1, u, u^2, u^3, (u - k)^3_+` over the interior knots in
    /// the rescaled variable `u = (x - x_min) / (x_max - x_min)`, which gives
    /// a C2 piecewise cubic. The least-squares problem is solved by SVD.
    pub fn fit_pairs(confidence: &[f64], correct: &[bool], knots: usize) -> Result<Self> {
        assert_eq!(confidence.len(), correct.len());
        let n = confidence.len();
        if knots < 2 {
            return Err(Error::validation(
                "spline calibration needs at least 2 knots",
            ));
        }
        if n < knots + 2 {
            return Err(Error::validation(format!(
                "spline calibration with {knots} knots needs at least {} samples, got {n}",
                knots + 2
            )));
        }
        if confidence.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::validation("confidences must lie in [0, 1]"));
        }
        let mut sorted = confidence.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut knot_x: Vec<f64> = (0..knots)
            .map(|j| sorted[((j * (n - 1)) as f64 / (knots - 1) as f64).round() as usize])
            .collect();
        knot_x.dedup();
        if knot_x.len() < 2 {
            return Err(Error::validation(
                "spline calibration needs at least 2 distinct confidence values",
            ));
        }
        let lo = knot_x[0];
        let width = knot_x[knot_x.len() - 1] - lo;
        let u_knots: Vec<f64> = knot_x.iter().map(|k| (k - lo) / width).collect();
        let interior = &u_knots[1..u_knots.len() - 1];

        let p = 4 + interior.len();
        let design = DMatrix::from_fn(n, p, |i, col| {
            let u = ((confidence[i] - lo) / width).clamp(0.0, 1.0);
            if col < 4 {
                u.powi(col as i32)
            } else {
                (u - interior[col - 4]).max(0.0).powi(3)
            }
        });
        let target = DVector::from_iterator(n, correct.iter().map(|&c| if c { 1.0 } else { 0.0 }));
        let svd = design.svd(true, true);
        let beta = svd
            .solve(&target, 1e-12)
            .map_err(|e| Error::Numerical(format!("spline least squares failed: {e}")))?;
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numerical(
                "spline coefficients are not finite".into(),
            ));
        }

        let coefficients = u_knots[..u_knots.len() - 1]
            .iter()
            .map(|&start| {
                let (a0, a1, a2, a3) = (beta[0], beta[1], beta[2], beta[3]);
                let mut c = [
                    a0 + start * (a1 + start * (a2 + start * a3)),
                    a1 + start * (2.0 * a2 + 3.0 * a3 * start),
                    a2 + 3.0 * a3 * start,
                    a3,
                ];
                for (k, &kappa) in interior.iter().enumerate() {
                    if kappa <= start {
                        let (b, d) = (beta[4 + k], start - kappa);
                        c[0] += b * d * d * d;
                        c[1] += 3.0 * b * d * d;
                        c[2] += 3.0 * b * d;
                        c[3] += b;
                    }
                }
                // Back from u to x: t_u = t_x / width.
                [
                    c[0],
                    c[1] / width,
                    c[2] / (width * width),
                    c[3] / (width * width * width),
                ]
            })
            .collect();
        let model = Self {
            knots: knot_x,
            coefficients,
        };
        model.check()?;
        Ok(model)
    }

    /// Spline value at `x`, clamped to `[0, 1]`.
    pub fn evaluate(&self, x: f64) -> f64 {
        let last = self.knots.len() - 1;
        let x = x.clamp(self.knots[0], self.knots[last]);
        let j = self.knots.partition_point(|&k| k <= x).clamp(1, last) - 1;
        let t = x - self.knots[j];
        let [c0, c1, c2, c3] = self.coefficients[j];
        (c0 + t * (c1 + t * (c2 + t * c3))).clamp(0.0, 1.0)
    }

    /// Replaces each row's top probability `p*` by the spline value and
    /// rescales the other entries to carry the remaining mass in proportion
    /// to their original values (uniformly if they were all zero).
    ///
    /// The new top value is kept in `[SPLINE_EPSILON, 1 - SPLINE_EPSILON]` and
    /// floored just above the rescaled runner-up, so the predicted class
    /// never changes.
    pub fn apply(&self, probs: &ProbMatrix) -> ProbMatrix {
        let c = probs.classes();
        let mut out = probs.as_slice().to_vec();
        for row in out.chunks_exact_mut(c) {
            let top = crate::prediction::argmax(row);
            let others: f64 = row
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != top)
                .map(|(_, &v)| v)
                .sum();
            let runner_up = row
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != top)
                .map(|(_, &v)| v)
                .fold(0.0, f64::max);
            let s = self
                .evaluate(row[top])
                .clamp(SPLINE_EPSILON, 1.0 - SPLINE_EPSILON);
            if others > 0.0 {
                // Keeps s > runner_up * (1 - s) / others.
                let s = s.max(runner_up / (others + runner_up) + SPLINE_EPSILON);
                let scale = (1.0 - s) / others;
                for (k, v) in row.iter_mut().enumerate() {
                    *v = if k == top { s } else { *v * scale };
                }
            } else {
                let s = s.max(1.0 / c as f64 + SPLINE_EPSILON);
                let share = (1.0 - s) / (c - 1) as f64;
                for (k, v) in row.iter_mut().enumerate() {
                    *v = if k == top { s } else { share };
                }
            }
        }
        ProbMatrix::from_rows_unchecked(out, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Spline that is constant `v` everywhere.
    fn constant(v: f64) -> SplineModel {
        SplineModel {
            knots: vec![0.0, 1.0],
            coefficients: vec![[v, 0.0, 0.0, 0.0]],
        }
    }

    #[test]
    fn identity_is_a_no_op() {
        let p = ProbMatrix::new(vec![0.6, 0.3, 0.1, 0.2, 0.2, 0.6], 3).unwrap();
        let out = SplineModel::identity().apply(&p);
        for (a, b) in out.as_slice().iter().zip(p.as_slice()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn proportional_redistribution() {
        let p = ProbMatrix::new(vec![0.6, 0.3, 0.1], 3).unwrap();
        let out = constant(0.5).apply(&p);
        let expected = [0.5, 0.375, 0.125];
        for (a, b) in out.row(0).iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_fallback_for_one_hot_rows() {
        let p = ProbMatrix::new(vec![1.0, 0.0, 0.0], 3).unwrap();
        let out = constant(0.98).apply(&p);
        let expected = [0.98, 0.01, 0.01];
        for (a, b) in out.row(0).iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn argmax_floor() {
        // A spline that maps everything to 0.1 would hand the top spot to
        // the runner-up without the floor.
        let p = ProbMatrix::new(vec![0.5, 0.4, 0.1, 0.2, 0.3, 0.5], 3).unwrap();
        let out = constant(0.1).apply(&p);
        assert_eq!(out.predicted(), p.predicted());
        for row in out.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluation_is_clamped() {
        let wild = SplineModel {
            knots: vec![0.2, 0.8],
            coefficients: vec![[-0.5, 10.0, 0.0, 0.0]],
        };
        assert_eq!(wild.evaluate(0.0), 0.0);
        assert_eq!(wild.evaluate(1.0), 1.0);
        assert_abs_diff_eq!(wild.evaluate(0.25), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn tiny_non_monotone_sample_still_defined() {
        let conf = [0.3, 0.35, 0.4, 0.5, 0.55, 0.6, 0.7, 0.8, 0.9, 0.95];
        let correct = [
            true, true, false, true, false, false, true, false, false, true,
        ];
        let m = SplineModel::fit_pairs(&conf, &correct, 4).unwrap();
        for i in 0..=100 {
            let v = m.evaluate(i as f64 / 100.0);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn not_enough_data() {
        let conf = [0.5, 0.6, 0.7];
        assert!(SplineModel::fit_pairs(&conf, &[true, false, true], 7).is_err());
        assert!(SplineModel::fit_pairs(&[0.5; 12], &[true; 12], 7).is_err());
    }

    #[test]
    fn pieces_join_smoothly() {
        let conf: Vec<f64> = (0..400)
            .map(|i| 0.2 + 0.8 * ((i * 37) % 400) as f64 / 400.0)
            .collect();
        let correct: Vec<bool> = (0..400).map(|i| (i * 13) % 7 < 4).collect();
        let m = SplineModel::fit_pairs(&conf, &correct, 7).unwrap();
        // Value, first and second derivative continuity at interior knots.
        for j in 1..m.knots.len() - 1 {
            let h = m.knots[j] - m.knots[j - 1];
            let [a0, a1, a2, a3] = m.coefficients[j - 1];
            let [b0, b1, b2, _] = m.coefficients[j];
            assert_abs_diff_eq!(a0 + h * (a1 + h * (a2 + h * a3)), b0, epsilon = 1e-9);
            assert_abs_diff_eq!(a1 + h * (2.0 * a2 + 3.0 * a3 * h), b1, epsilon = 1e-8);
            assert_abs_diff_eq!(a2 + 3.0 * a3 * h, b2, epsilon = 1e-6);
        }
    }
}
