use std::path::Path;
use std::process::{Command, Output};

fn pgnaa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgnaa"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SMALL_MLC: &str = r#"{"kind": "mlc", "n_refs": 20, "ref_time_s": 60}"#;

fn small_config(dir: &Path, name: &str, classifiers: &str) -> String {
    let path = dir.join(name);
    let body = format!(
        r#"{{
            "library": {{"source": "synthetic", "material": "aluminium", "profile": "cebr-aluminium-chips"}},
            "classifiers": {classifiers},
            "time_grid": [0.5, 1.0],
            "n_train": 10,
            "n_test": 10,
            "repeats": 2,
            "seed": 4
        }}"#
    );
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn default_classifiers() -> String {
    format!(r#"[{SMALL_MLC}, {{"kind": "kuiper"}}]"#)
}

#[test]
fn library_to_classification_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&pgnaa(d, &["gen-synth", "--profile", "cebr-aluminium-chips", "-o", "lib"]));
    assert!(d.join("lib/manifest.json").exists());
    ok(&pgnaa(d, &["sample", "--library", "lib", "-t", "2", "-n", "30", "-o", "train"]));
    ok(&pgnaa(d, &["sample", "--library", "lib", "-t", "2", "-n", "10", "--mode", "test", "--seed", "9", "-o", "test"]));

    for clf in ["mlc", "knn", "lr"] {
        let model = format!("{clf}.json");
        ok(&pgnaa(d, &["train", "--library", "lib", "--classifier", clf, "-d", "train", "-o", &model]));
        let out = ok(&pgnaa(d, &["classify", "-m", &model, "--data", "test", "test/spectrum_00000.csv"]));
        let mut lines = out.lines();
        let first = lines.next().unwrap();
        assert!(first.starts_with("test/spectrum_00000.csv,AA"), "{first}");
        let acc: f64 = lines.next().unwrap().strip_prefix("accuracy,").unwrap().parse().unwrap();
        assert!((0.0..=100.0).contains(&acc));
        // Five alloys; anything trained should beat guessing.
        assert!(acc > 20.0, "{clf}: {acc}");
    }
}

#[test]
fn cvae_train_and_generate() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&pgnaa(d, &["gen-synth", "--profile", "cebr-aluminium-chips", "-o", "lib"]));
    ok(&pgnaa(d, &["sample", "--library", "lib", "-t", "1", "-n", "8", "-o", "train"]));
    ok(&pgnaa(
        d,
        &["train-cvae", "-d", "train", "-o", "cvae.json", "--epochs", "2", "--hidden-units", "8", "--latent-dim", "2"],
    ));
    ok(&pgnaa(d, &["generate", "-m", "cvae.json", "-n", "3", "-o", "gen"]));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("gen/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["entries"].as_array().unwrap().len(), 15);
}

#[test]
fn bench_writes_csv_and_json() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = small_config(d, "cfg.json", &default_classifiers());
    ok(&pgnaa(d, &["bench", "-c", &cfg, "--csv", "t.csv", "--json", "t.json"]));
    let csv = std::fs::read_to_string(d.join("t.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "classifier,material,time_s,accuracy_mean,acc_r1,acc_r2,fit_ms,predict_ms");
    assert_eq!(lines.count(), 4);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("t.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);

    // Flags override the file.
    let out = ok(&pgnaa(d, &["bench", "-c", &cfg, "--time-grid", "1", "--classifier", "kuiper", "--repeats", "1"]));
    assert_eq!(out.lines().count(), 2);
    assert!(out.lines().nth(1).unwrap().starts_with("Kui,aluminium,1,"));
}

#[test]
fn compare_detectors_reports_crossover_line() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = small_config(d, "cfg.json", &default_classifiers());
    let out = ok(&pgnaa(d, &["compare-detectors", "-c", &cfg, "--repeats", "1"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "time_s,hpge_accuracy,cebr_accuracy");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("# crossover_time_s,"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = small_config(d, "cfg.json", &default_classifiers());
    for args in [
        vec!["bench", "-c", &cfg, "--time-grid", "1,0.5"],
        vec!["bench", "-c", &cfg, "--classifier", "forest"],
        vec!["bench", "-c", &cfg, "--profile", "nai-detector"],
        vec!["bench", "--unknown-flag"],
        vec!["gen-synth", "--material", "steel", "-o", "x"],
    ] {
        assert_eq!(pgnaa(d, &args).status.code(), Some(2), "{args:?}");
    }
    std::fs::write(d.join("broken.json"), "{ not json").unwrap();
    assert_eq!(pgnaa(d, &["bench", "-c", "broken.json"]).status.code(), Some(2));

    // A classifier that fails in every repeat leaves a partial table.
    let partial = small_config(d, "partial.json", r#"[{"kind": "kuiper"}, {"kind": "logistic-regression", "c": -1}]"#);
    let out = pgnaa(d, &["bench", "-c", &partial]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("LR,aluminium,0.5,,,")), "{csv}");
}
