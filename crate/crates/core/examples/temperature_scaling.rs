//! Recover a known distortion temperature and watch ECE drop.
//!
//! ```text
//! cargo run -p calkit --example temperature_scaling
//! ```

use calkit::metrics::ece;
use calkit::{BinningScheme, SplitSpec, SyntheticSpec, TemperatureModel};

fn main() -> calkit::Result<()> {
    let scheme = BinningScheme::default();
    for (seed, true_t) in [0.5, 1.0, 2.5, 4.0].into_iter().enumerate() {
        let (set, _) = SyntheticSpec {
            n: 50_000,
            classes: 10,
            temperature: true_t,
            seed: seed as u64,
            ..SyntheticSpec::default()
        }
        .generate()?;
        let (cal, test) = set.split(&SplitSpec::default())?;
        let model = TemperatureModel::fit(&cal)?;
        let before = ece(&test.probabilities(), test.labels(), scheme)?;
        let after = ece(&model.apply(&test), test.labels(), scheme)?;
        println!(
            "T* = {true_t:<4} fitted T = {:.4}   ECE {before:.4} -> {after:.4}",
            model.temperature
        );
    }
    Ok(())
}
