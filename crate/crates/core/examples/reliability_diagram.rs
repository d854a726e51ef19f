//! Reliability-diagram data before and after temperature scaling, drawn as
//! a text bar chart and written as plot-ready CSV.
//!
//! ```text
//! cargo run -p calkit --example reliability_diagram
//! ```

use calkit::harness::reliability_csv;
use calkit::metrics::reliability;
use calkit::{BinningScheme, Calibrator, Method, ReliabilityData, SplitSpec, SyntheticSpec};

fn draw(title: &str, data: &ReliabilityData) {
    println!(
        "{title} (accuracy {:.3}, mean confidence {:.3})",
        data.accuracy, data.mean_confidence
    );
    for row in &data.rows {
        let bar = |v: f64| "#".repeat((v * 40.0).round() as usize);
        println!(
            "  conf {:.3} |{:<40}|",
            row.mean_confidence,
            bar(row.mean_confidence)
        );
        println!(
            "  acc  {:.3} |{:<40}| n={}",
            row.mean_accuracy,
            bar(row.mean_accuracy),
            row.count
        );
    }
}

fn main() -> calkit::Result<()> {
    let (set, _) = SyntheticSpec {
        n: 20_000,
        classes: 10,
        temperature: 2.5,
        seed: 3,
        ..SyntheticSpec::default()
    }
    .generate()?;
    let (cal, test) = set.split(&SplitSpec::default())?;
    let scheme = BinningScheme::equal_mass(10);

    let before = reliability(&test.probabilities(), test.labels(), scheme)?;
    let ts = Calibrator::fit(Method::Ts, &cal)?;
    let after = reliability(&ts.apply(&test), test.labels(), scheme)?;
    draw("uncalibrated", &before);
    draw("temperature scaled", &after);

    let path = std::env::temp_dir().join("calkit-reliability.csv");
    std::fs::write(&path, reliability_csv(&after)).map_err(|e| calkit::Error::Io {
        path: path.clone(),
        source: e,
    })?;
    println!("wrote {}", path.display());
    Ok(())
}
