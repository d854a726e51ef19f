//! Command-line front end for `calkit`.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use calkit::harness::{self, EvalOptions, Manifest, ReportFormat};
use calkit::io::{self, Content, Format};
use calkit::metrics::reliability;
use calkit::{BinMode, BinningScheme, Calibrator, Error, Method, Result, SyntheticSpec};

#[derive(Parser)]
#[command(
    name = "calkit",
    version,
    about = "Calibration metrics, post-hoc calibrators and shift sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Copy)]
struct BinArgs {
    /// Number of confidence bins.
    #[arg(long, default_value_t = 15)]
    bins: usize,
    /// equal-mass or equal-width.
    #[arg(long, default_value = "equal-mass")]
    mode: BinMode,
}

impl BinArgs {
    fn scheme(self) -> BinningScheme {
        BinningScheme {
            mode: self.mode,
            m: self.bins,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a manifest (and every file it lists) or a single prediction file.
    Validate {
        path: PathBuf,
        /// Treat a single prediction file as probabilities.
        #[arg(long)]
        probabilities: bool,
    },
    /// Fit a calibrator on a calibration file and save it as JSON.
    Fit {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        cal: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        probabilities: bool,
    },
    /// Apply a saved calibrator; writes log-probabilities (CSV if --out ends in .csv, CALP otherwise).
    Apply {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        probabilities: bool,
    },
    /// Evaluate every test entry of a manifest under the given methods.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "uncal,ts,ets,irm,spl")]
        methods: String,
        #[command(flatten)]
        bins: BinArgs,
        #[arg(long)]
        out: PathBuf,
        /// Allow fitting on a calibration entry that carries a corruption.
        #[arg(long)]
        allow_shifted_calibration: bool,
    },
    /// Per-bin reliability-diagram data as CSV.
    Reliability {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        bins: BinArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        probabilities: bool,
    },
    /// Corruption/severity sweep with per-severity means and ΔECE.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "uncal,ts,ets,irm,spl")]
        methods: String,
        #[command(flatten)]
        bins: BinArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        allow_shifted_calibration: bool,
    },
    /// Generate a synthetic prediction set with a known distortion temperature.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        classes: usize,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        concentration: f64,
        #[arg(long, default_value_t = 0.0)]
        label_noise: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the perfectly calibrated reference set.
        #[arg(long)]
        reference_out: Option<PathBuf>,
    },
}

fn content(probabilities: bool) -> Content {
    if probabilities {
        Content::Probabilities
    } else {
        Content::Logits
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_model(path: &Path) -> Result<Calibrator> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Calibrator::from_json(&text)
}

fn validate(path: &Path, probabilities: bool) -> Result<()> {
    let is_manifest = path.extension().and_then(|e| e.to_str()) == Some("json");
    if !is_manifest {
        let set = io::read_predictions(path, content(probabilities))?;
        println!(
            "{}: ok (n = {}, C = {})",
            path.display(),
            set.len(),
            set.classes()
        );
        return Ok(());
    }
    let manifest = Manifest::from_path(path)?;
    let mut first_error = None;
    for entry in &manifest.entries {
        let file = manifest.resolve(entry);
        let read = match entry.format {
            Some(f) => io::read_predictions_as(&file, f, entry.content),
            None => io::read_predictions(&file, entry.content),
        };
        match read {
            Ok(set) => println!(
                "{}: ok (n = {}, C = {})",
                entry.name,
                set.len(),
                set.classes()
            ),
            Err(e) => {
                println!("{}: FAILED: {e}", entry.name);
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => manifest.load().map(|_| ()),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate {
            path,
            probabilities,
        } => validate(&path, probabilities),
        Command::Fit {
            method,
            cal,
            out,
            probabilities,
        } => {
            let set = io::read_predictions(&cal, content(probabilities))?;
            let model = Calibrator::fit(method, &set)?;
            write_file(&out, model.to_json().as_bytes())
        }
        Command::Apply {
            model,
            input,
            out,
            probabilities,
        } => {
            let model = load_model(&model)?;
            let set = io::read_predictions(&input, content(probabilities))?;
            let calibrated = model.apply(&set).to_log_scores(set.labels().to_vec())?;
            io::write_predictions(&out, &calibrated, Format::for_path(&out))
        }
        Command::Eval {
            manifest,
            methods,
            bins,
            out,
            allow_shifted_calibration,
        } => {
            let manifest = Manifest::from_path(&manifest)?;
            let options = EvalOptions {
                scheme: bins.scheme(),
                allow_shifted_calibration,
            };
            let result =
                harness::run_eval(&manifest.load()?, &Method::parse_list(&methods)?, &options)?;
            for path in harness::emit(&result, &out, &[ReportFormat::Json, ReportFormat::Csv])? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Reliability {
            input,
            model,
            bins,
            out,
            probabilities,
        } => {
            let set = io::read_predictions(&input, content(probabilities))?;
            let calibrator = match model {
                Some(p) => load_model(&p)?,
                None => Calibrator::Uncal,
            };
            let data = reliability(&calibrator.apply(&set), set.labels(), bins.scheme())?;
            write_file(&out, &harness::reliability_csv(&data))
        }
        Command::Sweep {
            manifest,
            methods,
            bins,
            out,
            allow_shifted_calibration,
        } => {
            let manifest = Manifest::from_path(&manifest)?;
            let options = EvalOptions {
                scheme: bins.scheme(),
                allow_shifted_calibration,
            };
            let result =
                harness::run_sweep(&manifest.load()?, &Method::parse_list(&methods)?, &options)?;
            for path in harness::emit(&result, &out, &[ReportFormat::Json, ReportFormat::Csv])? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Synth {
            n,
            classes,
            temperature,
            seed,
            concentration,
            label_noise,
            out,
            reference_out,
        } => {
            let spec = SyntheticSpec {
                n,
                classes,
                concentration,
                temperature,
                label_noise,
                seed,
            };
            let (distorted, reference) = spec.generate()?;
            io::write_predictions(&out, &distorted, Format::for_path(&out))?;
            if let Some(path) = reference_out {
                io::write_predictions(&path, &reference, Format::for_path(&path))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
