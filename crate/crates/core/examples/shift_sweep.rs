//! A corruption/severity sweep from a manifest: calibrators are fitted once
//! on the clean calibration entry and applied to progressively shifted data.
//!
//! ```text
//! cargo run -p calkit --example shift_sweep
//! ```

use std::path::Path;

use calkit::harness::{self, EvalOptions, Manifest, ReportFormat};
use calkit::io::{write_predictions, Format};
use calkit::{Method, PredictionSet, SyntheticSpec};

fn synth(temperature: f64, seed: u64) -> calkit::Result<PredictionSet> {
    Ok(SyntheticSpec {
        n: 5_000,
        classes: 10,
        temperature,
        seed,
        ..SyntheticSpec::default()
    }
    .generate()?
    .0)
}

fn write(dir: &Path, name: &str, set: &PredictionSet) -> calkit::Result<()> {
    write_predictions(&dir.join(name), set, Format::Calp)
}

fn main() -> calkit::Result<()> {
    let dir = std::env::temp_dir().join("calkit-shift-sweep");
    std::fs::create_dir_all(&dir).map_err(|e| calkit::Error::Io {
        path: dir.clone(),
        source: e,
    })?;

    // Overconfident model; each corruption sharpens the logits further.
    write(&dir, "cal.calp", &synth(1.5, 1)?)?;
    let mut entries = vec![
        r#"{"name":"clean-cal","model":"demo","path":"cal.calp","role":"calibration"}"#.to_string(),
    ];
    for (k, corruption) in ["blur", "noise", "contrast"].iter().enumerate() {
        let clean = synth(1.5, 10 + k as u64)?;
        for severity in 1..=5u8 {
            let file = format!("{corruption}-{severity}.calp");
            write(
                &dir,
                &file,
                &clean.scaled(1.0 + 0.15 * f64::from(severity))?,
            )?;
            entries.push(format!(
                r#"{{"name":"{corruption}-{severity}","model":"demo","path":"{file}","role":"test","corruption":"{corruption}","severity":{severity}}}"#
            ));
        }
    }
    let manifest_path = dir.join("manifest.json");
    std::fs::write(
        &manifest_path,
        format!("{{\"entries\":[{}]}}", entries.join(",\n")),
    )
    .map_err(|e| calkit::Error::Io {
        path: manifest_path.clone(),
        source: e,
    })?;

    let loaded = Manifest::from_path(&manifest_path)?.load()?;
    let sweep = harness::run_sweep(&loaded, &Method::ALL, &EvalOptions::default())?;
    println!(
        "{:<6} {:>3} {:>8} {:>10}",
        "method", "sev", "ece", "delta_ece"
    );
    for s in &sweep.severity_means {
        println!(
            "{:<6} {:>3} {:>8.4} {:>+10.4}",
            s.method, s.severity, s.ece, s.delta_ece
        );
    }
    for path in harness::emit(
        &sweep,
        &dir.join("report"),
        &[ReportFormat::Json, ReportFormat::Csv],
    )? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
