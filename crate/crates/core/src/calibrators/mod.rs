//! Post-hoc calibrators with a common fit/apply contract.
//!
//! Each calibrator is fitted once on a calibration [`PredictionSet`] and then
//! applied unchanged to any number of evaluation sets. Temperature scaling
//! and its ensemble variant act on logits; isotonic regression and spline
//! calibration act on `softmax(logits)`.
//!
//! Fitted models serialize to JSON with a `method` tag:
//!
//! ```json
//! {"method": "ts", "temperature": 1.83}
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::{PredictionSet, ProbMatrix};

mod ets;
mod isotonic;
mod spline;
mod temperature;

pub use ets::EtsModel;
pub use isotonic::{pava, IrmModel};
pub use spline::{SplineModel, DEFAULT_KNOTS, SPLINE_EPSILON};
pub use temperature::{TemperatureModel, MAX_TEMPERATURE, MIN_TEMPERATURE};

/// Calibration method names as used on the command line and in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Plain softmax, no calibration.
    Uncal,
    Ts,
    Ets,
    Irm,
    Spl,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Uncal,
        Method::Ts,
        Method::Ets,
        Method::Irm,
        Method::Spl,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Uncal => "uncal",
            Method::Ts => "ts",
            Method::Ets => "ets",
            Method::Irm => "irm",
            Method::Spl => "spl",
        }
    }

    /// Parses a comma-separated list such as `uncal,ts,ets`.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Method = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::validation("no calibration methods given"));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                Error::validation(format!(
                    "unknown calibration method `{s}` (expected uncal, ts, ets, irm or spl)"
                ))
            })
    }
}

/// A fitted calibrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Calibrator {
    Uncal,
    Ts(TemperatureModel),
    Ets(EtsModel),
    Irm(IrmModel),
    Spl(SplineModel),
}

impl Calibrator {
    pub fn fit(method: Method, cal: &PredictionSet) -> Result<Self> {
        Ok(match method {
            Method::Uncal => Calibrator::Uncal,
            Method::Ts => Calibrator::Ts(TemperatureModel::fit(cal)?),
            Method::Ets => Calibrator::Ets(EtsModel::fit(cal)?),
            Method::Irm => Calibrator::Irm(IrmModel::fit(cal)?),
            Method::Spl => Calibrator::Spl(SplineModel::fit(cal)?),
        })
    }

    pub fn method(&self) -> Method {
        match self {
            Calibrator::Uncal => Method::Uncal,
            Calibrator::Ts(_) => Method::Ts,
            Calibrator::Ets(_) => Method::Ets,
            Calibrator::Irm(_) => Method::Irm,
            Calibrator::Spl(_) => Method::Spl,
        }
    }

    /// Calibrated probabilities for every row of `preds`.
    pub fn apply(&self, preds: &PredictionSet) -> ProbMatrix {
        match self {
            Calibrator::Uncal => preds.probabilities(),
            Calibrator::Ts(m) => m.apply(preds),
            Calibrator::Ets(m) => m.apply(preds),
            Calibrator::Irm(m) => m.apply(&preds.probabilities()),
            Calibrator::Spl(m) => m.apply(&preds.probabilities()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibrator models always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Calibrator = serde_json::from_str(text)
            .map_err(|e| Error::validation(format!("invalid model document: {e}")))?;
        model.check()?;
        Ok(model)
    }

    /// Re-checks parameter invariants after deserialization.
    fn check(&self) -> Result<()> {
        match self {
            Calibrator::Uncal => Ok(()),
            Calibrator::Ts(m) => m.check(),
            Calibrator::Ets(m) => m.check(),
            Calibrator::Irm(m) => m.check(),
            Calibrator::Spl(m) => m.check(),
        }
    }
}

/// Labels must cover at least two classes for a meaningful fit.
pub(crate) fn require_two_classes(cal: &PredictionSet) -> Result<()> {
    let first = cal.labels()[0];
    if cal.labels().iter().all(|&y| y == first) {
        return Err(Error::validation(format!(
            "calibration set is degenerate: every label is class {first}"
        )));
    }
    Ok(())
}
