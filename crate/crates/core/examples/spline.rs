//! Fixed-knot cubic spline calibration of the top-label confidence.
//!
//! ```text
//! cargo run -p calkit --example spline
//! ```

use calkit::metrics::ece;
use calkit::{BinningScheme, SplineModel, SplitSpec, SyntheticSpec};

fn main() -> calkit::Result<()> {
    let (set, _) = SyntheticSpec {
        n: 30_000,
        classes: 10,
        temperature: 2.0,
        seed: 9,
        ..SyntheticSpec::default()
    }
    .generate()?;
    let (cal, test) = set.split(&SplitSpec::default())?;
    let spl = SplineModel::fit(&cal)?;

    println!(
        "knots: {:?}",
        spl.knots
            .iter()
            .map(|k| format!("{k:.3}"))
            .collect::<Vec<_>>()
    );
    for pair in spl.knots.windows(2) {
        let x = 0.5 * (pair[0] + pair[1]);
        println!("  s({x:.3}) = {:.4}", spl.evaluate(x));
    }
    let scheme = BinningScheme::default();
    println!(
        "test ECE {:.4} -> {:.4}",
        ece(&test.probabilities(), test.labels(), scheme)?,
        ece(&spl.apply(&test.probabilities()), test.labels(), scheme)?
    );
    Ok(())
}
