//! Ensemble temperature scaling on data with uniform label noise, where the
//! uniform component of the ensemble earns its weight.
//!
//! ```text
//! cargo run -p calkit --example ensemble_temperature
//! ```

use calkit::metrics::nll;
use calkit::{EtsModel, SplitSpec, SyntheticSpec, TemperatureModel};

fn main() -> calkit::Result<()> {
    for noise in [0.0, 0.1, 0.3] {
        let (set, _) = SyntheticSpec {
            n: 30_000,
            classes: 10,
            temperature: 1.5,
            label_noise: noise,
            seed: 11,
            ..SyntheticSpec::default()
        }
        .generate()?;
        let (cal, test) = set.split(&SplitSpec::default())?;
        let ts = TemperatureModel::fit(&cal)?;
        let ets = EtsModel::fit(&cal)?;
        let [w1, w2, w3] = ets.weights;
        println!(
            "noise {noise:.1}: T = {:.3}, w = ({w1:.3}, {w2:.3}, {w3:.3}), test NLL TS {:.4} / ETS {:.4}",
            ets.temperature,
            nll(&ts.apply(&test), test.labels())?,
            nll(&ets.apply(&test), test.labels())?
        );
    }
    Ok(())
}
