//! Probability calibration toolkit for classifier predictions.
//!
//! `calkit` works on saved predictions (per-sample logits plus integer labels)
//! and provides:
//!
//! - [`prediction`]: the [`PredictionSet`] data model, numerically stable
//!   softmax, validation, and seeded calibration/test splitting.
//! - [`synth`]: synthetic prediction sets with known ground truth.
//! - [`io`]: the `CALP` binary format and the CSV alternative.
//! - [`binning`]: equal-mass and equal-width confidence binning.
//! - [`metrics`]: ECE, MCE, RMSCE, root Brier score, NLL, accuracy and
//!   reliability-diagram data.
//! - [`calibrators`]: temperature scaling, ensemble temperature scaling,
//!   pooled isotonic regression and cubic spline calibration.
//! - [`harness`]: manifests, evaluation runs, shift-severity sweeps and
//!   deterministic report emission.
//!
//! Every capability has a runnable program under `examples/`; the `calkit`
//! binary exposes the same operations on the command line.

pub mod binning;
pub mod calibrators;
pub mod error;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod optim;
pub mod prediction;
pub mod synth;

pub use binning::{BinMode, BinPartition, BinStat, BinningScheme};
pub use calibrators::{Calibrator, EtsModel, IrmModel, Method, SplineModel, TemperatureModel};
pub use error::{Error, Result};
pub use metrics::{MetricReport, ReliabilityData};
pub use prediction::{PredictionSet, ProbMatrix, SplitSpec};
pub use synth::SyntheticSpec;

/// Version string stamped into every emitted report.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
