//! Every metric under both binning schemes and several bin counts.
//!
//! ```text
//! cargo run -p calkit --example metrics_report
//! ```

use calkit::{BinningScheme, MetricReport, SyntheticSpec};

fn main() -> calkit::Result<()> {
    let (set, _) = SyntheticSpec {
        n: 20_000,
        classes: 10,
        temperature: 2.0,
        seed: 1,
        ..SyntheticSpec::default()
    }
    .generate()?;
    let probs = set.probabilities();

    println!(
        "{:<12} {:>3} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "mode", "m", "acc", "ece", "mce", "rmsce", "rbs", "nll"
    );
    for m in [15, 25, 50] {
        for scheme in [BinningScheme::equal_mass(m), BinningScheme::equal_width(m)] {
            let r = MetricReport::compute(&probs, set.labels(), scheme)?;
            println!(
                "{:<12} {:>3} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                scheme.mode, m, r.accuracy, r.ece, r.mce, r.rmsce, r.root_brier, r.nll
            );
        }
    }
    Ok(())
}
