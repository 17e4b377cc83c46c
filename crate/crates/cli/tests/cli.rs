//! End-to-end runs of the `erythro` binary on a small synthetic corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn erythro(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_erythro"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ERYTHRO_MODEL_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn corpus(dir: &Path, per_class: usize) -> PathBuf {
    let root = dir.join("corpus");
    let o = erythro(&["synth", "--out", root.to_str().unwrap(), "--per-class", &per_class.to_string()], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    root
}

fn cache_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

#[test]
fn extract_caches_and_reuses() {
    let dir = TempDir::new().unwrap();
    let root = corpus(dir.path(), 1);
    let args = ["extract", "--dataset", "corpus", "--variant", "original", "--cache-dir", "cache", "--csv"];
    let first = erythro(&args, dir.path());
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("wrote"));
    assert!(stdout(&first).contains("(3x135)"));
    let files = cache_files(&dir.path().join("cache"));
    assert_eq!(files.len(), 2);
    let before: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();

    let second = erythro(&args, dir.path());
    assert!(second.status.success());
    assert!(stdout(&second).contains("cache hit"));
    let after: Vec<Vec<u8>> = cache_files(&dir.path().join("cache")).iter().map(|f| fs::read(f).unwrap()).collect();
    assert_eq!(before, after);

    let name = files[0].file_name().unwrap().to_str().unwrap().to_string();
    assert!(name.starts_with("builtin-original-"), "{name}");
    drop(root);
}

#[test]
fn missing_model_exits_3_and_names_the_path() {
    let dir = TempDir::new().unwrap();
    corpus(dir.path(), 1);
    let o = erythro(
        &["extract", "--dataset", "corpus", "--backbone", "mobilenet", "--model-dir", "nowhere", "--cache-dir", "c"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("mobilenet.model"), "{}", stderr(&o));
}

#[test]
fn dataset_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let o = erythro(&["extract", "--dataset", "absent", "--cache-dir", "c"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_64_and_help_exits_0() {
    let dir = TempDir::new().unwrap();
    assert_eq!(erythro(&["evaluate", "--k", "one"], dir.path()).status.code(), Some(64));
    assert_eq!(erythro(&["evaluate", "--k", "1", "--dataset", "x"], dir.path()).status.code(), Some(64));
    assert_eq!(erythro(&["frobnicate"], dir.path()).status.code(), Some(64));
    assert_eq!(erythro(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn evaluate_writes_reports_and_is_repeatable() {
    let dir = TempDir::new().unwrap();
    corpus(dir.path(), 6);
    let run = |out: &str| {
        let o = erythro(
            &["evaluate", "--dataset", "corpus", "--variant", "segmented", "--k", "3", "--cache-dir", "cache", "--out", out],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("| Backbone |"));
        let grid = erythro_core::report::read_grid_json(&dir.path().join(out).join("results.json")).unwrap();
        assert_eq!(grid.len(), 2);
        let mut stripped = erythro_core::ExperimentGrid::new();
        for (_, cell) in grid.cells() {
            if let erythro_core::report::CellOutcome::Done(r) = cell {
                stripped.insert(r.without_timings()).unwrap();
            }
        }
        erythro_core::report::grid_to_json(&stripped)
    };
    assert_eq!(run("a"), run("b"));
    for f in ["results.json", "results.csv", "results.md"] {
        assert!(dir.path().join("a").join(f).is_file(), "{f}");
    }
}

#[test]
fn evaluate_records_failed_cells_and_exits_4() {
    let dir = TempDir::new().unwrap();
    corpus(dir.path(), 4);
    let o = erythro(
        &[
            "evaluate", "--dataset", "corpus", "--variant", "original", "--k", "2", "--backbone", "builtin",
            "--backbone", "resnet50", "--model-dir", "none", "--cache-dir", "cache", "--out", "res",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let json = fs::read_to_string(dir.path().join("res/results.json")).unwrap();
    assert!(json.contains("resnet50.model"));
    let grid = erythro_core::report::read_grid_json(&dir.path().join("res/results.json")).unwrap();
    assert_eq!(grid.len(), 4);
    assert!(grid.has_failures());
}

/// Three well-separated clusters written as a CSV feature file.
fn separable_csv(path: &Path) {
    let mut text = String::from("image_id,label,f0,f1\n");
    for i in 0..30 {
        let c = i % 3;
        let (x, y) = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)][c];
        let jitter = (i as f64 * 0.37).sin();
        text.push_str(&format!("s{i:02},{c},{},{}\n", x + jitter, y - jitter));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn train_then_predict_is_self_consistent() {
    let dir = TempDir::new().unwrap();
    separable_csv(&dir.path().join("train.csv"));
    for classifier in ["svm", "nb"] {
        let model = format!("{classifier}.ecm");
        let o = erythro(
            &["train", "--input", "train.csv", "--classifier", classifier, "--out", &model, "--json", "dump.json"],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(dir.path().join("dump.json").is_file());
        let o = erythro(&["predict", "--model", &model, "--input", "train.csv"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
        assert_eq!(lines.len(), 30);
        for (i, line) in lines.iter().enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 5, "{line}");
            assert_eq!(fields[0], format!("s{i:02}"));
            let expected = ["normal", "sickle", "other"][i % 3];
            assert_eq!(fields[1], expected, "{classifier}: {line}");
            assert!(fields[2..].iter().all(|s| s.parse::<f64>().is_ok()));
        }
    }
}

#[test]
fn predict_dim_mismatch_exits_5() {
    let dir = TempDir::new().unwrap();
    separable_csv(&dir.path().join("train.csv"));
    assert!(erythro(&["train", "--input", "train.csv", "--classifier", "svm", "--out", "m.ecm"], dir.path())
        .status
        .success());
    fs::write(dir.path().join("wide.csv"), "image_id,label,f0,f1,f2\na,0,1,2,3\n").unwrap();
    let o = erythro(&["predict", "--model", "m.ecm", "--input", "wide.csv"], dir.path());
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("DimMismatch"), "{}", stderr(&o));

    let o = erythro(&["predict", "--model", "missing.ecm", "--input", "wide.csv"], dir.path());
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn predict_on_empty_input_prints_nothing() {
    let dir = TempDir::new().unwrap();
    separable_csv(&dir.path().join("train.csv"));
    assert!(erythro(&["train", "--input", "train.csv", "--classifier", "nb", "--out", "m.ecm"], dir.path())
        .status
        .success());
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    fs::write(dir.path().join("header.csv"), "image_id,label,f0,f1\n").unwrap();
    for input in ["empty.csv", "header.csv"] {
        let o = erythro(&["predict", "--model", "m.ecm", "--input", input], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn benchmark_reports_requested_repetitions() {
    let dir = TempDir::new().unwrap();
    let o = erythro(
        &["benchmark", "--synthetic", "60x20", "--repetitions", "3", "--out", "bench.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("bench.json")).unwrap()).unwrap();
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    for r in results {
        for stat in ["train_s", "predict_per_1000_s"] {
            assert_eq!(r[stat]["samples"].as_array().unwrap().len(), 3);
            assert!(r[stat]["median"].is_number() && r[stat]["mean"].is_number());
        }
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    corpus(dir.path(), 3);
    fs::write(
        dir.path().join("run.json"),
        r#"{"dataset_root": "corpus", "variant": "original", "classifiers": ["nb"], "k": 3, "cache_dir": "cache", "output": "from-config"}"#,
    )
    .unwrap();
    let o = erythro(&["evaluate", "--config", "run.json", "--out", "from-flag"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("from-flag/results.json").is_file());
    assert!(!dir.path().join("from-config").exists());
    let grid = erythro_core::report::read_grid_json(&dir.path().join("from-flag/results.json")).unwrap();
    assert_eq!(grid.len(), 1);
    let report = grid.report("builtin", erythro_core::ClassifierKind::Nb, erythro_core::ImageVariant::Original);
    assert_eq!(report.unwrap().config.k, 3);
}
