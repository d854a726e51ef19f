//! Pool-adjacent-violators by hand, then a full isotonic calibrator.
//!
//! ```text
//! cargo run -p calkit --example isotonic
//! ```

use calkit::calibrators::pava;
use calkit::metrics::ece;
use calkit::{BinningScheme, IrmModel, SplitSpec, SyntheticSpec};

fn main() -> calkit::Result<()> {
    println!(
        "PAVA of (0, 1, 0, 1): {:?}",
        pava(&[0.0, 1.0, 0.0, 1.0], &[1.0; 4])
    );

    let model = IrmModel::fit_pairs(&[0.2, 0.4, 0.6, 0.8], &[0.0, 1.0, 0.0, 1.0])?;
    for x in [0.0, 0.3, 0.5, 0.7, 1.0] {
        println!("  map({x}) = {:.6}", model.map(x));
    }

    let (set, _) = SyntheticSpec {
        n: 30_000,
        classes: 10,
        temperature: 0.5,
        seed: 5,
        ..SyntheticSpec::default()
    }
    .generate()?;
    let (cal, test) = set.split(&SplitSpec::default())?;
    let irm = IrmModel::fit(&cal)?;
    let scheme = BinningScheme::default();
    println!(
        "{} breakpoints; test ECE {:.4} -> {:.4}",
        irm.breakpoints.len(),
        ece(&test.probabilities(), test.labels(), scheme)?,
        ece(&irm.apply(&test.probabilities()), test.labels(), scheme)?
    );
    Ok(())
}
