//! Synthetic prediction sets with known calibration ground truth.
//!
//! For each sample a posterior `q` is drawn from a symmetric Dirichlet and
//! the label from `Categorical(q)`. The reference logits are `ln q`, so the
//! reference set is perfectly calibrated. The distorted logits are
//! `temperature * ln q`: for `temperature > 1` the model is overconfident and
//! dividing its logits by exactly `temperature` restores calibration, so that
//! is the NLL-optimal temperature in the population limit.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`; Dirichlet draws
//! are normalized `rand_distr::Gamma` samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::PredictionSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub classes: usize,
    /// Symmetric Dirichlet parameter.
    pub concentration: f64,
    /// Distortion temperature applied to the reference logits.
    pub temperature: f64,
    /// Probability of replacing a label by a uniformly drawn class.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 10_000,
            classes: 10,
            concentration: 0.3,
            temperature: 1.0,
            label_noise: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("synthetic sample count must be positive"));
        }
        if self.classes < 2 {
            return Err(Error::validation("synthetic sets need at least 2 classes"));
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return Err(Error::validation(
                "Dirichlet concentration must be positive",
            ));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::validation("distortion temperature must be positive"));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::validation("label noise must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Returns `(distorted, calibrated_reference)`.
    pub fn generate(&self) -> Result<(PredictionSet, PredictionSet)> {
        self.validate()?;
        let gamma = Gamma::new(self.concentration, 1.0)
            .map_err(|e| Error::validation(format!("bad Dirichlet concentration: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let c = self.classes;
        let mut reference = Vec::with_capacity(self.n * c);
        let mut labels = Vec::with_capacity(self.n);
        let mut q = vec![0.0; c];
        for _ in 0..self.n {
            let mut total = 0.0;
            for v in q.iter_mut() {
                // Gamma draws with tiny shape can underflow; keep logs finite.
                *v = gamma.sample(&mut rng).max(f64::MIN_POSITIVE);
                total += *v;
            }
            for v in q.iter_mut() {
                *v /= total;
            }
            let u: f64 = rng.random();
            let mut label = c - 1;
            let mut acc = 0.0;
            for (k, &p) in q.iter().enumerate() {
                acc += p;
                if u < acc {
                    label = k;
                    break;
                }
            }
            if self.label_noise > 0.0 && rng.random::<f64>() < self.label_noise {
                label = rng.random_range(0..c);
            }
            labels.push(label);
            reference.extend(q.iter().map(|p| p.max(f64::MIN_POSITIVE).ln()));
        }
        let distorted: Vec<f64> = reference.iter().map(|z| z * self.temperature).collect();
        Ok((
            PredictionSet::new(distorted, c, labels.clone())?,
            PredictionSet::new(reference, c, labels)?,
        ))
    }
}
