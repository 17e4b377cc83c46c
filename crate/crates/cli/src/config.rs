use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use erythro_core::features::Backbone;
use erythro_core::{ClassifierKind, ImageVariant, SvmParams};
use serde::Deserialize;

use crate::failure::Failure;

pub const MODEL_DIR_ENV: &str = "ERYTHRO_MODEL_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VariantChoice {
    Original,
    Segmented,
    Both,
}

impl VariantChoice {
    pub fn variants(self) -> Vec<ImageVariant> {
        match self {
            VariantChoice::Original => vec![ImageVariant::Original],
            VariantChoice::Segmented => vec![ImageVariant::Segmented],
            VariantChoice::Both => ImageVariant::ALL.to_vec(),
        }
    }
}

/// Flags shared by every run command. Unset flags fall back to the config
/// file, then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Corpus root containing original/ and segmented/
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantChoice>,
    /// densenet169, resnet50, mobilenet or builtin (repeatable)
    #[arg(long = "backbone")]
    pub backbones: Vec<Backbone>,
    /// svm or nb (repeatable)
    #[arg(long = "classifier")]
    pub classifiers: Vec<ClassifierKind>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// SVM soft-margin penalty
    #[arg(long = "c")]
    pub c_penalty: Option<f64>,
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Directory holding <backbone>.model and <backbone>.json (default: $ERYTHRO_MODEL_DIR, then ./models)
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Recompute feature caches even when a valid one exists
    #[arg(long)]
    pub force: bool,
    /// JSON file with any of the RunConfig fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub repetitions: Option<usize>,
}

/// Contents of `--config run.json`; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    dataset_root: Option<PathBuf>,
    variant: Option<VariantChoice>,
    backbones: Option<Vec<Backbone>>,
    classifiers: Option<Vec<ClassifierKind>>,
    k: Option<usize>,
    seed: Option<u64>,
    c_penalty: Option<f64>,
    standardize: Option<bool>,
    cache_dir: Option<PathBuf>,
    model_dir: Option<PathBuf>,
    output: Option<PathBuf>,
    repetitions: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset_root: Option<PathBuf>,
    pub variant: VariantChoice,
    pub backbones: Vec<Backbone>,
    pub classifiers: Vec<ClassifierKind>,
    pub k: usize,
    pub seed: u64,
    pub c_penalty: f64,
    pub standardize: bool,
    pub cache_dir: PathBuf,
    pub model_dir: PathBuf,
    pub output: Option<PathBuf>,
    pub force: bool,
    pub repetitions: usize,
}

impl RunConfig {
    /// Flags > config file > defaults.
    pub fn resolve(args: &RunArgs) -> Result<Self, Failure> {
        let file = match &args.config {
            Some(path) => read_config(path)?,
            None => ConfigFile::default(),
        };
        let model_dir = args
            .model_dir
            .clone()
            .or(file.model_dir)
            .or_else(|| std::env::var_os(MODEL_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("models"));
        let mut backbones: Vec<Backbone> = pick_list(&args.backbones, file.backbones, vec![Backbone::Builtin]);
        backbones.dedup();
        let mut classifiers: Vec<ClassifierKind> =
            pick_list(&args.classifiers, file.classifiers, ClassifierKind::ALL.to_vec());
        classifiers.sort();
        classifiers.dedup();
        let cfg = RunConfig {
            dataset_root: args.dataset.clone().or(file.dataset_root),
            variant: args.variant.or(file.variant).unwrap_or(VariantChoice::Both),
            backbones,
            classifiers,
            k: args.k.or(file.k).unwrap_or(5),
            seed: args.seed.or(file.seed).unwrap_or(42),
            c_penalty: args.c_penalty.or(file.c_penalty).unwrap_or(2.9),
            standardize: if args.no_standardize { false } else { file.standardize.unwrap_or(true) },
            cache_dir: args
                .cache_dir
                .clone()
                .or(file.cache_dir)
                .unwrap_or_else(|| PathBuf::from(".erythro-cache")),
            model_dir,
            output: args.out.clone().or(file.output),
            force: args.force,
            repetitions: args.repetitions.or(file.repetitions).unwrap_or(5),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Failure> {
        if self.k < 2 {
            return Err(Failure::usage(format!("--k must be at least 2, got {}", self.k)));
        }
        if !(self.c_penalty > 0.0 && self.c_penalty.is_finite()) {
            return Err(Failure::usage(format!("--c must be positive, got {}", self.c_penalty)));
        }
        if self.repetitions == 0 {
            return Err(Failure::usage("--repetitions must be at least 1"));
        }
        if self.backbones.is_empty() || self.classifiers.is_empty() {
            return Err(Failure::usage("at least one backbone and one classifier are required"));
        }
        Ok(())
    }

    pub fn dataset_root(&self) -> Result<&Path, Failure> {
        self.dataset_root
            .as_deref()
            .ok_or_else(|| Failure::usage("--dataset is required"))
    }

    pub fn svm_params(&self) -> SvmParams {
        SvmParams {
            c_penalty: self.c_penalty,
            seed: self.seed,
            standardize: self.standardize,
            ..SvmParams::default()
        }
    }
}

fn pick_list<T: Clone>(flag: &[T], from_file: Option<Vec<T>>, default: Vec<T>) -> Vec<T> {
    if flag.is_empty() {
        from_file.unwrap_or(default)
    } else {
        flag.to_vec()
    }
}

fn read_config(path: &Path) -> Result<ConfigFile, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
}
