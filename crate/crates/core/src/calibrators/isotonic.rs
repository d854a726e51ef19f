use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::{PredictionSet, ProbMatrix};

/// Step added per breakpoint to make the fitted map strictly increasing.
const STRICTNESS_STEP: f64 = 1e-9;

/// Pool-adjacent-violators: weighted least-squares non-decreasing fit to `y`
/// (already ordered by the predictor). Returns one fitted value per input.
pub fn pava(y: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), weights.len());
    // Blocks as (weighted mean, total weight, length).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&v, &w) in y.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, l2) = blocks[blocks.len() - 1];
            let (m1, w1, l1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((m1 * w1 + m2 * w2) / w, w, l1 + l2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, len)| std::iter::repeat_n(m, len))
        .collect()
}

/// Isotonic calibration map shared by all classes.
///
/// Evaluated by linear interpolation between `(breakpoints, values)`,
/// clamped at the ends. Both vectors are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrmModel {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl IrmModel {
    /// The identity map on `[0, 1]`.
    pub fn identity() -> Self {
        Self {
            breakpoints: vec![0.0, 1.0],
            values: vec![0.0, 1.0],
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        let strictly_increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if self.breakpoints.len() < 2
            || self.breakpoints.len() != self.values.len()
            || !strictly_increasing(&self.breakpoints)
            || !strictly_increasing(&self.values)
            || self
                .breakpoints
                .iter()
                .chain(&self.values)
                .any(|v| !(0.0..=1.0).contains(v))
        {
            return Err(Error::validation(
                "isotonic map needs at least two strictly increasing breakpoints and values in [0, 1]",
            ));
        }
        Ok(())
    }

    /// Pools every `(p_ic, 1[y_i = c])` pair of `softmax(logits)`.
    pub fn fit(cal: &PredictionSet) -> Result<Self> {
        let probs = cal.probabilities();
        let c = cal.classes();
        let mut x = Vec::with_capacity(probs.as_slice().len());
        let mut y = Vec::with_capacity(x.capacity());
        for (i, row) in probs.rows().enumerate() {
            for (k, &p) in row.iter().enumerate() {
                x.push(p);
                y.push(if cal.labels()[i] == k { 1.0 } else { 0.0 });
            }
        }
        debug_assert_eq!(x.len(), cal.len() * c);
        Self::fit_pairs(&x, &y)
    }

    /// Fits the map to arbitrary `(prediction, target)` pairs in `[0, 1]`.
    ///
    /// Tied predictions are merged before pooling. Each constant block of
    /// the PAVA solution keeps its first and last prediction as breakpoints,
    /// the map is anchored at `(0, 0)` and `(1, 1)` when the data do not
    /// reach those ends, and the values are clamped to
    /// `[0, 1 - k * STRICTNESS_STEP]` before adding `i * STRICTNESS_STEP`
    /// to the `i`-th of the `k` points.
    pub fn fit_pairs(x: &[f64], y: &[f64]) -> Result<Self> {
        assert_eq!(x.len(), y.len());
        if let Some(i) = x.iter().chain(y).position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::validation(format!(
                "isotonic inputs must lie in [0, 1] (entry {i})"
            )));
        }
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));

        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        let mut ws: Vec<f64> = Vec::new();
        for &i in &order {
            if xs.last() == Some(&x[i]) {
                *ys.last_mut().unwrap() += y[i];
                *ws.last_mut().unwrap() += 1.0;
            } else {
                xs.push(x[i]);
                ys.push(y[i]);
                ws.push(1.0);
            }
        }
        if xs.len() < 2 {
            return Err(Error::validation(
                "isotonic calibration needs at least 2 distinct prediction values",
            ));
        }
        for (s, w) in ys.iter_mut().zip(&ws) {
            *s /= w;
        }
        let fitted = pava(&ys, &ws);

        let mut breakpoints = Vec::new();
        let mut values = Vec::new();
        if xs[0] > 0.0 {
            breakpoints.push(0.0);
            values.push(0.0);
        }
        let mut start = 0;
        while start < xs.len() {
            let mut end = start;
            while end + 1 < xs.len() && fitted[end + 1] == fitted[start] {
                end += 1;
            }
            breakpoints.push(xs[start]);
            values.push(fitted[start]);
            if end > start {
                breakpoints.push(xs[end]);
                values.push(fitted[end]);
            }
            start = end + 1;
        }
        if xs[xs.len() - 1] < 1.0 {
            breakpoints.push(1.0);
            values.push(1.0);
        }
        let k = values.len() as f64;
        let ceiling = 1.0 - k * STRICTNESS_STEP;
        for (i, v) in values.iter_mut().enumerate() {
            *v = v.clamp(0.0, ceiling) + i as f64 * STRICTNESS_STEP;
        }
        let model = Self {
            breakpoints,
            values,
        };
        model.check().map_err(|_| {
            Error::Numerical("isotonic map is not strictly increasing after adjustment".into())
        })?;
        Ok(model)
    }

    /// Value of the calibration map at `p`.
    pub fn map(&self, p: f64) -> f64 {
        let bp = &self.breakpoints;
        let last = bp.len() - 1;
        if p <= bp[0] {
            return self.values[0];
        }
        if p >= bp[last] {
            return self.values[last];
        }
        let j = bp.partition_point(|&b| b <= p);
        let (x0, x1) = (bp[j - 1], bp[j]);
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        v0 + (p - x0) * (v1 - v0) / (x1 - x0)
    }

    /// Maps every entry and renormalizes each row.
    pub fn apply(&self, probs: &ProbMatrix) -> ProbMatrix {
        let c = probs.classes();
        let mut out: Vec<f64> = probs.as_slice().iter().map(|&p| self.map(p)).collect();
        for row in out.chunks_exact_mut(c) {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            } else {
                row.fill(1.0 / c as f64);
            }
        }
        ProbMatrix::from_rows_unchecked(out, c)
    }
}
