//! Evaluation runs and distribution-shift sweeps over manifests.
//!
//! Calibrators are fitted exactly once per `(model, method)` on the model's
//! in-distribution calibration entry and applied unchanged to every test
//! entry, shifted or not. ΔECE is `ECE_calibrated - ECE_uncalibrated` on the
//! same entry, so negative values mean the calibrator helped.

mod manifest;
mod report;

pub use manifest::{LoadedEntry, Manifest, ManifestEntry, Role};
pub use report::{emit, reliability_csv, Report, ReportFormat};

use serde::Serialize;

use crate::binning::BinningScheme;
use crate::calibrators::{Calibrator, Method};
use crate::error::{Error, Result};
use crate::metrics::{reliability, MetricReport, ReliabilityData};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    pub scheme: BinningScheme,
    /// Permit fitting on a calibration entry that carries a corruption.
    pub allow_shifted_calibration: bool,
}

/// A calibrator fitted for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedModel {
    pub model: String,
    /// Calibration entry the model was fitted on, if any.
    pub fitted_on: Option<String>,
    pub calibrator: Calibrator,
}

/// Metrics of one test entry under one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub model: String,
    pub method: Method,
    pub entry: String,
    pub corruption: Option<String>,
    pub severity: Option<u8>,
    pub report: MetricReport,
    pub delta_ece: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityRecord {
    pub model: String,
    pub method: Method,
    pub entry: String,
    pub data: ReliabilityData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub scheme: BinningScheme,
    pub rows: Vec<EvalRow>,
    pub reliability: Vec<ReliabilityRecord>,
    pub models: Vec<FittedModel>,
}

/// Mean over the corruptions present at one severity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeverityMean {
    pub model: String,
    pub method: Method,
    pub severity: u8,
    pub corruptions: usize,
    pub accuracy: f64,
    pub ece: f64,
    pub mce: f64,
    pub rmsce: f64,
    pub root_brier: f64,
    pub nll: f64,
    pub delta_ece: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub scheme: BinningScheme,
    /// One row per shifted entry and method.
    pub details: Vec<EvalRow>,
    pub severity_means: Vec<SeverityMean>,
    pub models: Vec<FittedModel>,
}

/// Fits `method` for `model` on its calibration entry.
pub fn fit_for_model(
    loaded: &[LoadedEntry],
    model: &str,
    method: Method,
    options: &EvalOptions,
) -> Result<FittedModel> {
    let cal = loaded
        .iter()
        .find(|l| l.entry.model == model && l.entry.role == Role::Calibration);
    if method == Method::Uncal {
        return Ok(FittedModel {
            model: model.to_string(),
            fitted_on: None,
            calibrator: Calibrator::Uncal,
        });
    }
    let cal = cal.ok_or_else(|| {
        Error::validation(format!(
            "model `{model}` has no calibration entry; `{method}` needs one"
        ))
    })?;
    if cal.entry.is_shifted() && !options.allow_shifted_calibration {
        return Err(Error::Manifest {
            entry: cal.entry.name.clone(),
            message:
                "calibration entry is shifted; refusing to fit on it without an explicit override"
                    .into(),
        });
    }
    let calibrator = Calibrator::fit(method, &cal.set).map_err(|e| e.in_entry(&cal.entry.name))?;
    Ok(FittedModel {
        model: model.to_string(),
        fitted_on: Some(cal.entry.name.clone()),
        calibrator,
    })
}

fn evaluate(
    loaded: &[LoadedEntry],
    methods: &[Method],
    options: &EvalOptions,
    include: impl Fn(&ManifestEntry) -> bool,
) -> Result<(Vec<EvalRow>, Vec<ReliabilityRecord>, Vec<FittedModel>)> {
    if methods.is_empty() {
        return Err(Error::validation("no calibration methods requested"));
    }
    let mut models: Vec<&str> = Vec::new();
    for l in loaded {
        if !models.contains(&l.entry.model.as_str()) {
            models.push(&l.entry.model);
        }
    }
    let mut rows = Vec::new();
    let mut diagrams = Vec::new();
    let mut fitted_models = Vec::new();
    for model in models {
        let tests: Vec<&LoadedEntry> = loaded
            .iter()
            .filter(|l| l.entry.model == model && l.entry.role == Role::Test && include(&l.entry))
            .collect();
        if tests.is_empty() {
            continue;
        }
        let baseline: Vec<f64> = tests
            .iter()
            .map(|t| {
                MetricReport::compute(&t.set.probabilities(), t.set.labels(), options.scheme)
                    .map(|r| r.ece)
                    .map_err(|e| e.in_entry(&t.entry.name))
            })
            .collect::<Result<_>>()?;
        for &method in methods {
            let fitted = fit_for_model(loaded, model, method, options)?;
            for (t, &base_ece) in tests.iter().zip(&baseline) {
                let probs = fitted.calibrator.apply(&t.set);
                let report = MetricReport::compute(&probs, t.set.labels(), options.scheme)
                    .map_err(|e| e.in_entry(&t.entry.name))?;
                let data = reliability(&probs, t.set.labels(), options.scheme)
                    .map_err(|e| e.in_entry(&t.entry.name))?;
                rows.push(EvalRow {
                    model: model.to_string(),
                    method,
                    entry: t.entry.name.clone(),
                    corruption: t.entry.corruption.clone(),
                    severity: t.entry.severity,
                    delta_ece: if method == Method::Uncal {
                        0.0
                    } else {
                        report.ece - base_ece
                    },
                    report,
                });
                diagrams.push(ReliabilityRecord {
                    model: model.to_string(),
                    method,
                    entry: t.entry.name.clone(),
                    data,
                });
            }
            fitted_models.push(fitted);
        }
    }
    Ok((rows, diagrams, fitted_models))
}

/// Evaluates every test entry under every method.
pub fn run_eval(
    loaded: &[LoadedEntry],
    methods: &[Method],
    options: &EvalOptions,
) -> Result<EvalResult> {
    let (rows, reliability, models) = evaluate(loaded, methods, options, |_| true)?;
    if rows.is_empty() {
        return Err(Error::validation(
            "manifest has no test entries to evaluate",
        ));
    }
    Ok(EvalResult {
        scheme: options.scheme,
        rows,
        reliability,
        models,
    })
}

/// Evaluates every shifted test entry and averages per severity.
pub fn run_sweep(
    loaded: &[LoadedEntry],
    methods: &[Method],
    options: &EvalOptions,
) -> Result<SweepResult> {
    let (details, _, models) = evaluate(loaded, methods, options, ManifestEntry::is_shifted)?;
    if details.is_empty() {
        return Err(Error::validation(
            "manifest has no shifted test entries (corruption + severity) to sweep",
        ));
    }
    Ok(SweepResult {
        scheme: options.scheme,
        severity_means: severity_means(&details),
        details,
        models,
    })
}

/// Arithmetic means per `(model, method, severity)`, in order of first
/// appearance of `(model, method)` and ascending severity.
pub fn severity_means(details: &[EvalRow]) -> Vec<SeverityMean> {
    let mut groups: Vec<(&str, Method)> = Vec::new();
    for r in details {
        if !groups.contains(&(r.model.as_str(), r.method)) {
            groups.push((&r.model, r.method));
        }
    }
    let mut out = Vec::new();
    for (model, method) in groups {
        for severity in 1..=5u8 {
            let rows: Vec<&EvalRow> = details
                .iter()
                .filter(|r| r.model == model && r.method == method && r.severity == Some(severity))
                .collect();
            if rows.is_empty() {
                continue;
            }
            let k = rows.len() as f64;
            let mean = |f: &dyn Fn(&EvalRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / k;
            out.push(SeverityMean {
                model: model.to_string(),
                method,
                severity,
                corruptions: rows.len(),
                accuracy: mean(&|r| r.report.accuracy),
                ece: mean(&|r| r.report.ece),
                mce: mean(&|r| r.report.mce),
                rmsce: mean(&|r| r.report.rmsce),
                root_brier: mean(&|r| r.report.root_brier),
                nll: mean(&|r| r.report.nll),
                delta_ece: mean(&|r| r.delta_ece),
            });
        }
    }
    out
}
