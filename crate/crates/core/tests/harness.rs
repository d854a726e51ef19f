use std::fs;
use std::path::Path;

use calkit::harness::{self, EvalOptions, Manifest, Report, ReportFormat};
use calkit::io::{self, Format};
use calkit::metrics;
use calkit::{BinningScheme, Calibrator, Error, Method, PredictionSet, SyntheticSpec};

fn synth(n: usize, temperature: f64, seed: u64) -> PredictionSet {
    SyntheticSpec {
        n,
        classes: 6,
        temperature,
        seed,
        ..SyntheticSpec::default()
    }
    .generate()
    .unwrap()
    .0
}

fn put(dir: &Path, name: &str, set: &PredictionSet) {
    let path = dir.join(name);
    io::write_predictions(&path, set, Format::for_path(&path)).unwrap();
}

fn write_manifest(dir: &Path, entries: &[String]) -> Manifest {
    let path = dir.join("manifest.json");
    fs::write(&path, format!(r#"{{"entries":[{}]}}"#, entries.join(","))).unwrap();
    Manifest::from_path(&path).unwrap()
}

fn entry(name: &str, path: &str, role: &str, shift: Option<(&str, u8)>) -> String {
    let shift = shift
        .map(|(c, s)| format!(r#","corruption":"{c}","severity":{s}"#))
        .unwrap_or_default();
    format!(r#"{{"name":"{name}","model":"synth","path":"{path}","role":"{role}"{shift}}}"#)
}

/// Calibration split plus `corruptions x severities` shifted entries, where
/// severity `s` multiplies the clean logits by `1 / (1 + s/2)`.
fn shifted_manifest(dir: &Path, corruptions: &[&str], severities: &[u8]) -> Manifest {
    put(dir, "cal.calp", &synth(3000, 2.0, 1));
    let mut entries = vec![entry("cal", "cal.calp", "calibration", None)];
    for (k, c) in corruptions.iter().enumerate() {
        let clean = synth(2000, 2.0, 100 + k as u64);
        for &s in severities {
            let file = format!("{c}-{s}.calp");
            put(
                dir,
                &file,
                &clean.scaled(1.0 / (1.0 + f64::from(s) / 2.0)).unwrap(),
            );
            entries.push(entry(&format!("{c}-{s}"), &file, "test", Some((c, s))));
        }
    }
    write_manifest(dir, &entries)
}

#[test]
fn loads_two_entries() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "cal.calp", &synth(100, 1.0, 1));
    put(dir.path(), "test.csv", &synth(50, 1.0, 2));
    let m = write_manifest(
        dir.path(),
        &[
            entry("cal", "cal.calp", "calibration", None),
            entry("test", "test.csv", "test", None),
        ],
    );
    let loaded = m.load().unwrap();
    assert_eq!(loaded.len(), 2);
    assert_eq!((loaded[0].set.len(), loaded[1].set.len()), (100, 50));
}

#[test]
fn wrong_magic_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.calp"), b"NOPE\x01\x00\x00\x00").unwrap();
    let m = write_manifest(dir.path(), &[entry("bad", "bad.calp", "test", None)]);
    let err = m.load().unwrap_err();
    let text = err.to_string();
    assert!(text.contains("bad.calp") && text.contains("bad"), "{text}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), &[entry("gone", "gone.calp", "test", None)]);
    let err = m.load().unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn severity_without_corruption_is_rejected() {
    let err = Manifest::from_json(
        r#"{"entries":[{"name":"a","model":"m","path":"a.calp","role":"test","severity":3}]}"#,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Manifest { .. }), "{err}");
}

#[test]
fn class_counts_must_agree_within_a_model() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "cal.calp", &synth(100, 1.0, 1));
    let other = SyntheticSpec {
        n: 100,
        classes: 4,
        ..SyntheticSpec::default()
    }
    .generate()
    .unwrap()
    .0;
    put(dir.path(), "test.calp", &other);
    let m = write_manifest(
        dir.path(),
        &[
            entry("cal", "cal.calp", "calibration", None),
            entry("test", "test.calp", "test", None),
        ],
    );
    assert!(m.load().is_err());
}

#[test]
fn calibrated_methods_need_a_calibration_entry() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "test.calp", &synth(200, 1.0, 1));
    let m = write_manifest(dir.path(), &[entry("test", "test.calp", "test", None)]);
    let loaded = m.load().unwrap();
    let options = EvalOptions::default();
    assert!(harness::run_eval(&loaded, &[Method::Uncal], &options).is_ok());
    assert!(harness::run_eval(&loaded, &[Method::Ts], &options).is_err());
}

#[test]
fn shifted_calibration_needs_override() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "cal.calp", &synth(500, 2.0, 1));
    put(dir.path(), "test.calp", &synth(500, 2.0, 2));
    let m = write_manifest(
        dir.path(),
        &[
            entry("cal", "cal.calp", "calibration", Some(("fog", 1))),
            entry("test", "test.calp", "test", None),
        ],
    );
    let loaded = m.load().unwrap();
    let mut options = EvalOptions::default();
    assert!(harness::run_eval(&loaded, &[Method::Ts], &options).is_err());
    options.allow_shifted_calibration = true;
    assert!(harness::run_eval(&loaded, &[Method::Ts], &options).is_ok());
}

#[test]
fn sweep_counts_rows() {
    let dir = tempfile::tempdir().unwrap();
    let m = shifted_manifest(dir.path(), &["blur", "noise"], &[1, 2]);
    let sweep = harness::run_sweep(
        &m.load().unwrap(),
        &[Method::Uncal, Method::Ts],
        &EvalOptions::default(),
    )
    .unwrap();
    assert_eq!(sweep.details.len(), 8);
    assert_eq!(sweep.severity_means.len(), 4);
    let csv = sweep.to_csv();
    let lines = |name: &str| {
        let bytes = &csv.iter().find(|(n, _)| n == name).unwrap().1;
        String::from_utf8(bytes.clone()).unwrap().lines().count()
    };
    assert_eq!(lines("sweep_detail.csv"), 9);
    assert_eq!(lines("sweep_severity.csv"), 5);
}

#[test]
fn severity_means_and_uncal_delta() {
    let dir = tempfile::tempdir().unwrap();
    let m = shifted_manifest(dir.path(), &["blur", "noise", "snow"], &[1, 3, 5]);
    let sweep =
        harness::run_sweep(&m.load().unwrap(), &Method::ALL, &EvalOptions::default()).unwrap();
    for mean in &sweep.severity_means {
        let rows: Vec<_> = sweep
            .details
            .iter()
            .filter(|r| r.method == mean.method && r.severity == Some(mean.severity))
            .collect();
        assert_eq!(rows.len(), mean.corruptions);
        let avg = |f: fn(&calkit::harness::EvalRow) -> f64| {
            rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64
        };
        assert!((avg(|r| r.report.ece) - mean.ece).abs() <= 1e-12);
        assert!((avg(|r| r.report.nll) - mean.nll).abs() <= 1e-12);
        assert!((avg(|r| r.delta_ece) - mean.delta_ece).abs() <= 1e-12);
    }
    for row in sweep.details.iter().filter(|r| r.method == Method::Uncal) {
        assert_eq!(row.delta_ece, 0.0);
    }
}

#[test]
fn single_corruption_mean_is_that_value() {
    let dir = tempfile::tempdir().unwrap();
    let m = shifted_manifest(dir.path(), &["fog"], &[3]);
    let sweep =
        harness::run_sweep(&m.load().unwrap(), &[Method::Ts], &EvalOptions::default()).unwrap();
    assert_eq!(sweep.severity_means[0].ece, sweep.details[0].report.ece);
    assert_eq!(
        sweep.severity_means[0].delta_ece,
        sweep.details[0].delta_ece
    );
}

#[test]
fn uncal_ece_grows_with_severity() {
    // Calibrated clean data made increasingly underconfident.
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "cal.calp", &synth(3000, 1.0, 1));
    let clean = synth(20_000, 1.0, 2);
    let mut entries = vec![entry("cal", "cal.calp", "calibration", None)];
    for s in 1..=5u8 {
        let file = format!("s{s}.calp");
        put(
            dir.path(),
            &file,
            &clean.scaled(1.0 / (1.0 + f64::from(s) / 2.0)).unwrap(),
        );
        entries.push(entry(&format!("s{s}"), &file, "test", Some(("scale", s))));
    }
    let m = write_manifest(dir.path(), &entries);
    let sweep = harness::run_sweep(
        &m.load().unwrap(),
        &[Method::Uncal],
        &EvalOptions::default(),
    )
    .unwrap();
    let ece: Vec<f64> = sweep.severity_means.iter().map(|s| s.ece).collect();
    assert_eq!(ece.len(), 5);
    assert!(ece.windows(2).all(|w| w[0] < w[1]), "{ece:?}");
}

#[test]
fn fit_once_per_model_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let m = shifted_manifest(dir.path(), &["blur", "noise"], &[2, 4]);
    let loaded = m.load().unwrap();
    let options = EvalOptions::default();
    let sweep = harness::run_sweep(&loaded, &Method::ALL, &options).unwrap();
    assert_eq!(sweep.models.len(), Method::ALL.len());
    for fitted in &sweep.models {
        let method = fitted.calibrator.method();
        let refit = harness::fit_for_model(&loaded, "synth", method, &options).unwrap();
        assert_eq!(refit.calibrator.to_json(), fitted.calibrator.to_json());
        if method != Method::Uncal {
            assert_eq!(fitted.fitted_on.as_deref(), Some("cal"));
        }
    }
}

#[test]
fn ts_improves_its_own_calibration_split() {
    let set = synth(20_000, 2.5, 3);
    let s = BinningScheme::default();
    let before = metrics::ece(&set.probabilities(), set.labels(), s).unwrap();
    let after = metrics::ece(
        &Calibrator::fit(Method::Ts, &set).unwrap().apply(&set),
        set.labels(),
        s,
    )
    .unwrap();
    assert!(after < before, "{before} -> {after}");
}

#[test]
fn eval_reports_one_row_per_entry_and_method() {
    let dir = tempfile::tempdir().unwrap();
    put(dir.path(), "cal.calp", &synth(1000, 2.0, 1));
    put(dir.path(), "test.calp", &synth(1000, 2.0, 2));
    let m = write_manifest(
        dir.path(),
        &[
            entry("cal", "cal.calp", "calibration", None),
            entry("test", "test.calp", "test", None),
        ],
    );
    let result =
        harness::run_eval(&m.load().unwrap(), &Method::ALL, &EvalOptions::default()).unwrap();
    assert_eq!(result.rows.len(), 5);
    assert_eq!(result.reliability.len(), 5);
    let out = dir.path().join("out");
    let written = harness::emit(&result, &out, &[ReportFormat::Json, ReportFormat::Csv]).unwrap();
    assert_eq!(written.len(), 3);
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("eval.json")).unwrap()).unwrap();
    assert_eq!(json["kind"], "eval");
    assert_eq!(json["toolkit_version"], calkit::TOOLKIT_VERSION);
    let reliability = fs::read_to_string(out.join("reliability.csv")).unwrap();
    assert_eq!(reliability.lines().count(), 1 + 5 * 15);
    assert!(!reliability.contains('\r'));
}

#[test]
fn probability_entries_are_supported() {
    let dir = tempfile::tempdir().unwrap();
    let logits = synth(500, 1.5, 1);
    let probs = logits.probabilities();
    let as_probs = PredictionSet::new(
        probs.as_slice().to_vec(),
        probs.classes(),
        logits.labels().to_vec(),
    )
    .unwrap();
    put(dir.path(), "p.csv", &as_probs);
    let path = dir.path().join("manifest.json");
    fs::write(
        &path,
        r#"{"entries":[{"name":"p","model":"m","path":"p.csv","role":"test","content":"probabilities"}]}"#,
    )
    .unwrap();
    let loaded = Manifest::from_path(&path).unwrap().load().unwrap();
    let back = loaded[0].set.probabilities();
    for (a, b) in back.as_slice().iter().zip(probs.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
}
