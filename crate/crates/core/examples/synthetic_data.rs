//! Generate a miscalibrated synthetic set, split it, and round-trip it
//! through both file formats.
//!
//! ```text
//! cargo run -p calkit --example synthetic_data
//! ```

use calkit::io::{self, Content, Format};
use calkit::{SplitSpec, SyntheticSpec};

fn main() -> calkit::Result<()> {
    let spec = SyntheticSpec {
        n: 5_000,
        classes: 10,
        temperature: 2.5,
        seed: 42,
        ..SyntheticSpec::default()
    };
    let (distorted, reference) = spec.generate()?;
    println!(
        "{} samples, {} classes",
        distorted.len(),
        distorted.classes()
    );

    let (cal, test) = distorted.split(&SplitSpec {
        test_fraction: 0.9,
        seed: 0,
    })?;
    println!(
        "calibration split: {}, test split: {}",
        cal.len(),
        test.len()
    );

    let dir = std::env::temp_dir().join("calkit-synthetic-data");
    std::fs::create_dir_all(&dir).map_err(|e| calkit::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    for (name, format) in [("cal.calp", Format::Calp), ("cal.csv", Format::Csv)] {
        let path = dir.join(name);
        io::write_predictions(&path, &cal, format)?;
        let back = io::read_predictions(&path, Content::Logits)?;
        let max_err = back
            .logits()
            .iter()
            .zip(cal.logits())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!(
            "{}: {} rows, max logit round-trip error {max_err:.2e}",
            path.display(),
            back.len()
        );
    }

    // The reference set shares labels with the distorted one but is calibrated.
    assert_eq!(reference.labels(), distorted.labels());
    Ok(())
}
