use serde::{Deserialize, Serialize};

use super::require_two_classes;
use crate::error::{Error, Result};
use crate::optim::brent_minimize;
use crate::prediction::{argmax, PredictionSet, ProbMatrix};

pub const MIN_TEMPERATURE: f64 = 1e-2;
pub const MAX_TEMPERATURE: f64 = 1e2;
/// Absolute tolerance of the search, in `ln T`.
const LOG_TOLERANCE: f64 = 1e-6;

/// Temperature scaling: `softmax(logits / T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureModel {
    pub temperature: f64,
}

impl TemperatureModel {
    pub fn new(temperature: f64) -> Result<Self> {
        let model = Self { temperature };
        model.check()?;
        Ok(model)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::validation(format!(
                "temperature must be finite and positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Minimizes the NLL of `softmax(logits / T)` over
    /// `T in [MIN_TEMPERATURE, MAX_TEMPERATURE]` with Brent's method on `ln T`.
    ///
    /// The NLL is convex in `1/T`, hence unimodal in `ln T`.
    pub fn fit(cal: &PredictionSet) -> Result<Self> {
        require_two_classes(cal)?;
        let best = brent_minimize(
            |log_t| tempered_nll(cal, log_t.exp()),
            MIN_TEMPERATURE.ln(),
            MAX_TEMPERATURE.ln(),
            LOG_TOLERANCE,
            500,
        );
        let temperature = best.x.exp();
        if !best.value.is_finite() || !temperature.is_finite() {
            return Err(Error::Numerical(format!(
                "temperature search diverged (T = {temperature}, NLL = {})",
                best.value
            )));
        }
        Ok(Self { temperature })
    }

    pub fn apply(&self, preds: &PredictionSet) -> ProbMatrix {
        preds.tempered_probabilities(self.temperature)
    }
}

/// Exact mean NLL of `softmax(logits / t)` via log-sum-exp.
pub(crate) fn tempered_nll(preds: &PredictionSet, t: f64) -> f64 {
    let mut total = 0.0;
    for (row, &y) in preds.rows().zip(preds.labels()) {
        let max = row[argmax(row)];
        let lse: f64 = row.iter().map(|z| ((z - max) / t).exp()).sum::<f64>().ln();
        total += lse - (row[y] - max) / t;
    }
    total / preds.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;
    use crate::synth::SyntheticSpec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_temperature_is_plain_softmax() {
        let set = PredictionSet::new(vec![1.0, 2.0, 0.5, -3.0, 0.0, 4.0], 3, vec![0, 2]).unwrap();
        let m = TemperatureModel::new(1.0).unwrap();
        assert_eq!(m.apply(&set), set.probabilities());
    }

    #[test]
    fn halving_logits() {
        let set = PredictionSet::new(vec![2.0, 0.0], 2, vec![0]).unwrap();
        let p = TemperatureModel::new(2.0).unwrap().apply(&set);
        let e = 1f64.exp();
        assert_abs_diff_eq!(p.row(0)[0], e / (e + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(p.row(0)[0], 0.73106, epsilon = 1e-5);
        assert_abs_diff_eq!(p.row(0)[1], 0.26894, epsilon = 1e-5);
    }

    #[test]
    fn degenerate_labels_rejected() {
        let set = PredictionSet::new(vec![1.0, 0.0, 2.0, 0.0], 2, vec![1, 1]).unwrap();
        assert!(matches!(
            TemperatureModel::fit(&set),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn recovers_distortion_temperature() {
        let (distorted, _) = SyntheticSpec {
            n: 20_000,
            temperature: 2.5,
            seed: 11,
            ..Default::default()
        }
        .generate()
        .unwrap();
        let t = TemperatureModel::fit(&distorted).unwrap().temperature;
        assert!((2.3..2.7).contains(&t), "T = {t}");
    }

    #[test]
    fn fit_matches_scan() {
        let (set, _) = SyntheticSpec {
            n: 2_000,
            classes: 5,
            temperature: 0.6,
            seed: 5,
            ..Default::default()
        }
        .generate()
        .unwrap();
        let fitted = TemperatureModel::fit(&set).unwrap();
        // Dense log-grid scan as an independent check.
        let (mut best_t, mut best) = (0.0, f64::INFINITY);
        for k in 0..=4000 {
            let t = (MIN_TEMPERATURE.ln()
                + k as f64 * (MAX_TEMPERATURE.ln() - MIN_TEMPERATURE.ln()) / 4000.0)
                .exp();
            let v = metrics::nll(&set.tempered_probabilities(t), set.labels()).unwrap();
            if v < best {
                (best_t, best) = (t, v);
            }
        }
        assert!(
            (fitted.temperature / best_t - 1.0).abs() < 3e-3,
            "{} vs {best_t}",
            fitted.temperature
        );
        assert!(tempered_nll(&set, fitted.temperature) <= best + 1e-9);
    }

    #[test]
    fn scale_consistent() {
        let (set, _) = SyntheticSpec {
            n: 3_000,
            temperature: 1.7,
            seed: 9,
            ..Default::default()
        }
        .generate()
        .unwrap();
        let t = TemperatureModel::fit(&set).unwrap().temperature;
        for s in [0.5, 3.0] {
            let ts = TemperatureModel::fit(&set.scaled(s).unwrap())
                .unwrap()
                .temperature;
            assert!((ts / s - t).abs() < 1e-3, "s = {s}: {ts} vs {t}");
        }
    }
}
