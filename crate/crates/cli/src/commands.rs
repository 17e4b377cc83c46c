use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use erythro_core::classifiers::{self, load_model, save_model, save_model_json, ClassifierError};
use erythro_core::dataset::load_dataset;
use erythro_core::eval::{benchmark as run_benchmark, cross_validate, CvConfig, TimingSummary};
use erythro_core::features::{
    self, load_features, load_features_csv, save_features, save_features_csv, Backbone, BackboneSpec, FeatureError,
};
use erythro_core::report::{self, CellKey};
use erythro_core::synthetic::{synthetic_features, write_synthetic_corpus};
use erythro_core::{write_atomic, ClassLabel, Dataset, ExperimentGrid, FeatureMatrix, ImageVariant};
use serde::Serialize;

use crate::config::{RunArgs, RunConfig};
use crate::failure::{Failure, EXIT_EVAL, EXIT_MODEL_IO};

const HASH_PREFIX: usize = 16;

fn cache_path(cfg: &RunConfig, backbone: Backbone, variant: ImageVariant, ds: &Dataset) -> PathBuf {
    let hash = ds.content_hash();
    cfg.cache_dir
        .join(format!("{}-{}-{}.efm", backbone.name(), variant.dir_name(), &hash[..HASH_PREFIX]))
}

fn resolve_spec(cfg: &RunConfig, backbone: Backbone) -> Result<BackboneSpec, FeatureError> {
    BackboneSpec::from_model_dir(backbone, &cfg.model_dir)
}

/// A cache is reusable when it parses and lists exactly the dataset's ids and labels.
fn valid_cache(path: &Path, ds: &Dataset, backbone: Backbone) -> Option<FeatureMatrix> {
    let m = load_features(path).ok()?;
    let same_rows = m.len() == ds.len()
        && m.backbone() == backbone.name()
        && ds
            .records()
            .iter()
            .zip(m.ids().iter().zip(m.labels()))
            .all(|(r, (id, label))| &r.id == id && r.label == *label);
    same_rows.then_some(m)
}

enum Cached {
    Hit(FeatureMatrix, PathBuf),
    Written(FeatureMatrix, PathBuf),
}

fn cached_features(
    cfg: &RunConfig,
    backbone: Backbone,
    variant: ImageVariant,
    ds: &Dataset,
) -> Result<Cached, Failure> {
    let path = cache_path(cfg, backbone, variant, ds);
    if !cfg.force {
        if let Some(m) = valid_cache(&path, ds, backbone) {
            return Ok(Cached::Hit(m, path));
        }
    }
    let spec = resolve_spec(cfg, backbone)?;
    let m = features::extract(ds, &spec)?;
    fs::create_dir_all(&cfg.cache_dir).map_err(|e| {
        Failure::new(EXIT_MODEL_IO, format!("cannot create {}: {e}", cfg.cache_dir.display()))
    })?;
    save_features(&m, &path)?;
    Ok(Cached::Written(m, path))
}

fn features_for(cfg: &RunConfig, backbone: Backbone, variant: ImageVariant) -> Result<FeatureMatrix, Failure> {
    let ds = load_dataset(cfg.dataset_root()?, variant)?;
    match cached_features(cfg, backbone, variant, &ds)? {
        Cached::Hit(m, _) | Cached::Written(m, _) => Ok(m),
    }
}

fn read_feature_file(path: &Path) -> Result<FeatureMatrix, Failure> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("features");
    if is_csv {
        Ok(load_features_csv(path, name)?)
    } else {
        Ok(load_features(path)?)
    }
}

fn single<T: Copy + std::fmt::Debug>(items: &[T], flag: &str) -> Result<T, Failure> {
    match items {
        [one] => Ok(*one),
        _ => Err(Failure::usage(format!("exactly one {flag} is required, got {items:?}"))),
    }
}

fn single_variant(cfg: &RunConfig) -> Result<ImageVariant, Failure> {
    single(&cfg.variant.variants(), "--variant (original or segmented)")
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    write_atomic(path, |w| w.write_all(text.as_bytes()))
        .map_err(|e| Failure::new(EXIT_MODEL_IO, format!("cannot write {}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::new(EXIT_MODEL_IO, format!("cannot create {}: {e}", dir.display())))
}

pub fn extract(args: &RunArgs, csv: bool) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(args)?;
    let root = cfg.dataset_root()?;
    for variant in cfg.variant.variants() {
        let ds = load_dataset(root, variant)?;
        for &backbone in &cfg.backbones {
            let (m, path) = match cached_features(&cfg, backbone, variant, &ds)? {
                Cached::Hit(m, path) => {
                    println!("cache hit {}", path.display());
                    (m, path)
                }
                Cached::Written(m, path) => {
                    println!("wrote {} ({}x{})", path.display(), m.len(), m.dim());
                    (m, path)
                }
            };
            if csv {
                let csv_path = path.with_extension("csv");
                if cfg.force || !csv_path.exists() {
                    save_features_csv(&m, &csv_path)?;
                }
            }
        }
    }
    Ok(())
}

pub fn evaluate(args: &RunArgs) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(args)?;
    let root = cfg.dataset_root()?;
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("results"));
    let mut grid = ExperimentGrid::new();
    for variant in cfg.variant.variants() {
        let ds = load_dataset(root, variant)?;
        for &backbone in &cfg.backbones {
            let features = match cached_features(&cfg, backbone, variant, &ds) {
                Ok(Cached::Hit(m, _) | Cached::Written(m, _)) => m,
                Err(f) => {
                    eprintln!("erythro: {backbone} on {variant}: {f}");
                    for &classifier in &cfg.classifiers {
                        let key = CellKey {
                            backbone: backbone.name().to_string(),
                            classifier,
                            variant,
                        };
                        grid.insert_failure(key, f.message.clone());
                    }
                    continue;
                }
            };
            for &classifier in &cfg.classifiers {
                let cv = CvConfig {
                    classifier,
                    k: cfg.k,
                    seed: cfg.seed,
                    svm: cfg.svm_params(),
                    variant: Some(variant),
                };
                match cross_validate(&features, &cv) {
                    Ok(report) => {
                        grid.insert(report)?;
                    }
                    Err(e) => {
                        eprintln!("erythro: {backbone}/{classifier} on {variant}: {e}");
                        let key = CellKey {
                            backbone: backbone.name().to_string(),
                            classifier,
                            variant,
                        };
                        grid.insert_failure(key, e.to_string());
                    }
                }
            }
        }
    }
    ensure_dir(&out)?;
    report::write_grid_json(&grid, &out.join("results.json"))?;
    report::write_csv(&grid, &out.join("results.csv"))?;
    report::write_markdown(&grid, &out.join("results.md"))?;
    print!("{}", report::render_markdown(&grid));
    if grid.has_failures() {
        return Err(Failure::new(EXIT_EVAL, "some grid cells failed; see results.json"));
    }
    Ok(())
}

pub fn train(args: &RunArgs, input: Option<&Path>, json: Option<&Path>) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(args)?;
    let classifier = single(&cfg.classifiers, "--classifier")?;
    let features = match input {
        Some(path) => read_feature_file(path)?,
        None => features_for(&cfg, single(&cfg.backbones, "--backbone")?, single_variant(&cfg)?)?,
    };
    let out = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}-{}.ecm", features.backbone(), classifier.name())));
    let model = classifiers::train(classifier, features.values().view(), features.labels(), &cfg.svm_params())
        .map_err(|e| Failure::eval(format!("training failed: {e}")))?;
    save_model(&model, &out)?;
    if let Some(json) = json {
        save_model_json(&model, json)?;
    }
    println!(
        "wrote {} ({} on {} rows x {} features)",
        out.display(),
        classifier,
        features.len(),
        features.dim()
    );
    Ok(())
}

pub fn predict(args: &RunArgs, model_path: &Path, input: Option<&Path>) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(args)?;
    let model = load_model(model_path)?;
    let features = match input {
        Some(path) if fs::metadata(path).is_ok_and(|m| m.len() == 0) => return Ok(()),
        Some(path) => read_feature_file(path)?,
        None => features_for(&cfg, single(&cfg.backbones, "--backbone")?, single_variant(&cfg)?)?,
    };
    if features.is_empty() {
        return Ok(());
    }
    if features.dim() != model.dim() {
        return Err(ClassifierError::DimMismatch {
            expected: model.dim(),
            found: features.dim(),
        }
        .into());
    }
    let predictions = model.predict_rows(features.values().view())?;
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let write_err = |e: io::Error| Failure::new(EXIT_MODEL_IO, format!("cannot write output: {e}"));
    for (id, p) in features.ids().iter().zip(&predictions) {
        write!(out, "{id},{}", p.label).map_err(write_err)?;
        for class in ClassLabel::ALL {
            match p.score(class) {
                Some(s) => write!(out, ",{s}"),
                None => write!(out, ","),
            }
            .map_err(write_err)?;
        }
        writeln!(out).map_err(write_err)?;
    }
    out.flush().map_err(write_err)
}

#[derive(Serialize)]
struct BenchmarkFile<'a> {
    schema_version: &'a str,
    variant: Option<ImageVariant>,
    results: Vec<TimingSummary>,
}

pub fn benchmark(args: &RunArgs, synthetic: Option<(usize, usize)>) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(args)?;
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("benchmark.json"));
    let mut inputs = Vec::new();
    let variant = match synthetic {
        Some((rows, dim)) => {
            inputs.push(synthetic_features(rows, dim, cfg.seed));
            None
        }
        None => {
            let variant = single_variant(&cfg)?;
            for &backbone in &cfg.backbones {
                inputs.push(features_for(&cfg, backbone, variant)?);
            }
            Some(variant)
        }
    };
    let mut results = Vec::new();
    for x in &inputs {
        for &classifier in &cfg.classifiers {
            let t = run_benchmark(x, classifier, cfg.repetitions, &cfg.svm_params())?;
            println!(
                "{} {} {}x{}: train median {:.4}s mean {:.4}s, predict/1000 median {:.4}s mean {:.4}s",
                t.backbone,
                t.classifier,
                t.rows,
                t.dim,
                t.train_s.median,
                t.train_s.mean,
                t.predict_per_1000_s.median,
                t.predict_per_1000_s.mean
            );
            results.push(t);
        }
    }
    let file = BenchmarkFile {
        schema_version: report::SCHEMA_VERSION,
        variant,
        results,
    };
    let text = serde_json::to_string_pretty(&file).expect("timings serialise") + "\n";
    write_text(&out, &text)
}

pub fn synth(out: &Path, per_class: usize, seed: u64) -> Result<(), Failure> {
    if per_class == 0 {
        return Err(Failure::usage("--per-class must be positive"));
    }
    write_synthetic_corpus(out, per_class, seed)
        .map_err(|e| Failure::new(EXIT_MODEL_IO, format!("cannot write corpus to {}: {e}", out.display())))?;
    println!("wrote {} images per class to {}", per_class, out.display());
    Ok(())
}
