use serde::{Deserialize, Serialize};

use super::temperature::TemperatureModel;
use crate::error::{Error, Result};
use crate::metrics::{self, NLL_EPSILON};
use crate::optim::project_to_simplex;
use crate::prediction::{PredictionSet, ProbMatrix};

/// Upper bound on the uniform weight of a fitted model. Keeping some mass on
/// the model components preserves the ranking of classes in every row.
const MAX_UNIFORM_WEIGHT: f64 = 1.0 - 1e-4;
const GRID_STEP: usize = 20;
const MAX_ITER: usize = 500;

/// Ensemble temperature scaling:
/// `w[0] * softmax(z / T) + w[1] * softmax(z) + w[2] / C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtsModel {
    pub temperature: f64,
    pub weights: [f64; 3],
}

impl EtsModel {
    pub fn new(temperature: f64, weights: [f64; 3]) -> Result<Self> {
        let model = Self {
            temperature,
            weights,
        };
        model.check()?;
        Ok(model)
    }

    pub(crate) fn check(&self) -> Result<()> {
        TemperatureModel {
            temperature: self.temperature,
        }
        .check()?;
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "ensemble weights must be nonnegative and sum to 1, got {:?}",
                self.weights
            )));
        }
        Ok(())
    }

    /// Two-stage fit: `T` from temperature scaling, then the weights that
    /// minimize NLL over the simplex (coarse grid, then projected gradient
    /// descent with backtracking). The pure temperature-scaling member
    /// `(1, 0, 0)` is kept whenever it scores at least as well, so the fitted
    /// NLL never exceeds the temperature-scaling NLL.
    pub fn fit(cal: &PredictionSet) -> Result<Self> {
        let ts = TemperatureModel::fit(cal)?;
        let t = ts.temperature;
        let tempered = cal.tempered_probabilities(t);
        let raw = cal.probabilities();
        let labels = cal.labels();
        let a: Vec<f64> = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| tempered.row(i)[y])
            .collect();
        let b: Vec<f64> = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| raw.row(i)[y])
            .collect();
        let objective = MixtureNll {
            a: &a,
            b: &b,
            uniform: 1.0 / cal.classes() as f64,
        };

        let mut w = [1.0, 0.0, 0.0];
        let mut best = objective.value(&w);
        for i in 0..=GRID_STEP {
            for j in 0..=GRID_STEP - i {
                let cand = [
                    i as f64 / GRID_STEP as f64,
                    j as f64 / GRID_STEP as f64,
                    (GRID_STEP - i - j) as f64 / GRID_STEP as f64,
                ];
                if cand[2] > MAX_UNIFORM_WEIGHT {
                    continue;
                }
                let v = objective.value(&cand);
                if v < best {
                    (w, best) = (cand, v);
                }
            }
        }
        let w = objective.descend(w, best);

        let candidate = Self {
            temperature: t,
            weights: w,
        };
        let ts_only = Self {
            temperature: t,
            weights: [1.0, 0.0, 0.0],
        };
        let score = |m: &Self| metrics::nll(&m.apply(cal), labels).unwrap_or(f64::INFINITY);
        let (cand_nll, ts_nll) = (score(&candidate), score(&ts_only));
        if !cand_nll.is_finite() && !ts_nll.is_finite() {
            return Err(Error::Numerical("ensemble NLL is not finite".into()));
        }
        Ok(if cand_nll <= ts_nll {
            candidate
        } else {
            ts_only
        })
    }

    pub fn apply(&self, preds: &PredictionSet) -> ProbMatrix {
        let tempered = preds.tempered_probabilities(self.temperature);
        let raw = preds.probabilities();
        let [w1, w2, w3] = self.weights;
        let uniform = w3 / preds.classes() as f64;
        let probs = tempered
            .as_slice()
            .iter()
            .zip(raw.as_slice())
            .map(|(p, q)| w1 * p + w2 * q + uniform)
            .collect();
        ProbMatrix::from_rows_unchecked(probs, preds.classes())
    }
}

/// Mean NLL of the true-class mixture probability `w . (a_i, b_i, u)`.
struct MixtureNll<'a> {
    a: &'a [f64],
    b: &'a [f64],
    uniform: f64,
}

impl MixtureNll<'_> {
    fn mix(&self, w: &[f64; 3], i: usize) -> f64 {
        w[0] * self.a[i] + w[1] * self.b[i] + w[2] * self.uniform
    }

    fn value(&self, w: &[f64; 3]) -> f64 {
        let n = self.a.len();
        (0..n)
            .map(|i| -self.mix(w, i).max(NLL_EPSILON).ln())
            .sum::<f64>()
            / n as f64
    }

    fn gradient(&self, w: &[f64; 3]) -> [f64; 3] {
        let n = self.a.len();
        let mut g = [0.0; 3];
        for i in 0..n {
            let m = self.mix(w, i);
            if m <= NLL_EPSILON {
                continue;
            }
            g[0] -= self.a[i] / m;
            g[1] -= self.b[i] / m;
            g[2] -= self.uniform / m;
        }
        g.map(|v| v / n as f64)
    }

    fn project(v: [f64; 3]) -> [f64; 3] {
        let p = project_to_simplex(&v);
        let mut w = [p[0], p[1], p[2]];
        if w[2] > MAX_UNIFORM_WEIGHT {
            let rest = w[0] + w[1];
            let keep = 1.0 - MAX_UNIFORM_WEIGHT;
            if rest > 0.0 {
                w[0] *= keep / rest;
                w[1] *= keep / rest;
            } else {
                w[0] = keep;
            }
            w[2] = MAX_UNIFORM_WEIGHT;
        }
        w
    }

    /// Projected gradient descent with Armijo backtracking. Only improving
    /// steps are taken.
    fn descend(&self, mut w: [f64; 3], mut value: f64) -> [f64; 3] {
        let mut step = 1.0;
        for _ in 0..MAX_ITER {
            let g = self.gradient(&w);
            let mut improved = false;
            while step > 1e-12 {
                let next =
                    Self::project([w[0] - step * g[0], w[1] - step * g[1], w[2] - step * g[2]]);
                let d: Vec<f64> = next.iter().zip(&w).map(|(x, y)| x - y).collect();
                let dist2: f64 = d.iter().map(|x| x * x).sum();
                if dist2 == 0.0 {
                    return w;
                }
                let decrease: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
                let v = self.value(&next);
                if v <= value + 1e-4 * decrease && v < value {
                    improved = value - v > 1e-15;
                    (w, value) = (next, v);
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SyntheticSpec;

    fn set() -> PredictionSet {
        PredictionSet::new(
            vec![2.0, 0.0, 1.0, 1.0, 3.0, -1.0, 0.5, 0.0, 0.0, 2.0, 1.0, -2.0],
            3,
            vec![0, 2, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn corner_weights() {
        let s = set();
        let t = 1.7;
        let ts = EtsModel::new(t, [1.0, 0.0, 0.0]).unwrap().apply(&s);
        assert_eq!(ts, TemperatureModel { temperature: t }.apply(&s));
        let raw = EtsModel::new(t, [0.0, 1.0, 0.0]).unwrap().apply(&s);
        assert_eq!(raw, s.probabilities());
        let uni = EtsModel::new(t, [0.0, 0.0, 1.0]).unwrap().apply(&s);
        assert!(uni.as_slice().iter().all(|&p| p == 1.0 / 3.0));
    }

    #[test]
    fn weights_must_be_on_simplex() {
        assert!(EtsModel::new(1.0, [0.5, 0.6, -0.1]).is_err());
        assert!(EtsModel::new(1.0, [0.5, 0.6, 0.1]).is_err());
        assert!(EtsModel::new(0.0, [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn never_worse_than_temperature_scaling() {
        let (d, _) = SyntheticSpec {
            n: 5_000,
            temperature: 2.0,
            seed: 1,
            ..Default::default()
        }
        .generate()
        .unwrap();
        let ets = EtsModel::fit(&d).unwrap();
        let ts = TemperatureModel::fit(&d).unwrap();
        let w_sum: f64 = ets.weights.iter().sum();
        assert!((w_sum - 1.0).abs() < 1e-9 && ets.weights.iter().all(|&w| w >= 0.0));
        let nll_ets = metrics::nll(&ets.apply(&d), d.labels()).unwrap();
        let nll_ts = metrics::nll(&ts.apply(&d), d.labels()).unwrap();
        assert!(nll_ets <= nll_ts + 1e-9);
    }

    #[test]
    fn label_noise_pulls_in_uniform_component() {
        let (d, _) = SyntheticSpec {
            n: 20_000,
            label_noise: 0.1,
            seed: 4,
            ..Default::default()
        }
        .generate()
        .unwrap();
        let ets = EtsModel::fit(&d).unwrap();
        let ts = TemperatureModel::fit(&d).unwrap();
        assert!(ets.weights[2] > 0.0, "{:?}", ets.weights);
        let nll_ets = metrics::nll(&ets.apply(&d), d.labels()).unwrap();
        let nll_ts = metrics::nll(&ts.apply(&d), d.labels()).unwrap();
        assert!(nll_ets < nll_ts, "{nll_ets} vs {nll_ts}");
    }

    #[test]
    fn descent_reaches_fine_grid_optimum() {
        let (d, _) = SyntheticSpec {
            n: 3_000,
            label_noise: 0.2,
            temperature: 1.5,
            seed: 8,
            ..Default::default()
        }
        .generate()
        .unwrap();
        let ets = EtsModel::fit(&d).unwrap();
        let fitted = metrics::nll(&ets.apply(&d), d.labels()).unwrap();
        // Exhaustive 0.01 grid over the simplex at the fitted temperature.
        let mut best = f64::INFINITY;
        for i in 0..=100 {
            for j in 0..=100 - i {
                let w = [
                    i as f64 / 100.0,
                    j as f64 / 100.0,
                    (100 - i - j) as f64 / 100.0,
                ];
                if w[2] > MAX_UNIFORM_WEIGHT {
                    continue;
                }
                let m = EtsModel {
                    temperature: ets.temperature,
                    weights: w,
                };
                best = best.min(metrics::nll(&m.apply(&d), d.labels()).unwrap());
            }
        }
        assert!(fitted <= best + 1e-9, "{fitted} vs grid {best}");
    }
}
