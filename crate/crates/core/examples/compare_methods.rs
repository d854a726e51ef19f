//! All calibrators side by side on one held-out split, plus a saved model.
//!
//! ```text
//! cargo run -p calkit --example compare_methods
//! ```

use calkit::{BinningScheme, Calibrator, Method, MetricReport, SplitSpec, SyntheticSpec};

fn main() -> calkit::Result<()> {
    let (set, _) = SyntheticSpec {
        n: 40_000,
        classes: 10,
        temperature: 2.5,
        label_noise: 0.05,
        seed: 2,
        ..SyntheticSpec::default()
    }
    .generate()?;
    let (cal, test) = set.split(&SplitSpec::default())?;

    println!(
        "{:<6} {:>8} {:>8} {:>8} {:>8}",
        "method", "acc", "ece", "rbs", "nll"
    );
    for method in Method::ALL {
        let model = Calibrator::fit(method, &cal)?;
        let r =
            MetricReport::compute(&model.apply(&test), test.labels(), BinningScheme::default())?;
        println!(
            "{:<6} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            method, r.accuracy, r.ece, r.root_brier, r.nll
        );
    }

    // Fitted models serialize to JSON and load back unchanged.
    let ets = Calibrator::fit(Method::Ets, &cal)?;
    println!("{}", ets.to_json());
    assert_eq!(Calibrator::from_json(&ets.to_json())?, ets);
    Ok(())
}
