//! Stratified cross-validation, metrics and timing.

mod bench;
mod folds;
mod metrics;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{self, ClassifierError, ClassifierKind, SvmParams, TrainedModel};
use crate::dataset::{ClassLabel, ImageVariant};
use crate::features::FeatureMatrix;

pub use bench::{benchmark, TimingStat, TimingSummary};
pub use folds::{stratified_kfold, FoldPlan};
pub use metrics::{compute_metrics, ClassMetrics, ConfusionMatrix, DegenerateFlag, MetricName, MetricSet};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid fold count k={k} for {n} samples (need 2 <= k <= n)")]
    BadK { k: usize, n: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Cross-validation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub classifier: ClassifierKind,
    pub k: usize,
    pub seed: u64,
    pub svm: SvmParams,
    /// Recorded in the report only.
    pub variant: Option<ImageVariant>,
}

impl CvConfig {
    pub fn new(classifier: ClassifierKind) -> Self {
        CvConfig {
            classifier,
            k: 5,
            seed: 42,
            svm: SvmParams::default(),
            variant: None,
        }
    }
}

/// Settings echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub backbone: String,
    pub classifier: ClassifierKind,
    pub variant: Option<ImageVariant>,
    pub k: usize,
    pub seed: u64,
    pub svm: Option<SvmParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: MetricSet,
    pub confusion: ConfusionMatrix,
    pub train_time_s: f64,
    pub predict_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ConfigEcho,
    pub per_fold: Vec<FoldResult>,
    /// Arithmetic mean of the per-fold metrics.
    pub aggregate: MetricSet,
}

impl EvalReport {
    pub fn mean_train_time_s(&self) -> f64 {
        self.per_fold.iter().map(|f| f.train_time_s).sum::<f64>() / self.per_fold.len() as f64
    }

    pub fn mean_predict_time_s(&self) -> f64 {
        self.per_fold.iter().map(|f| f.predict_time_s).sum::<f64>() / self.per_fold.len() as f64
    }

    /// Copy with every timing zeroed, for determinism comparisons.
    pub fn without_timings(&self) -> EvalReport {
        let mut out = self.clone();
        for f in &mut out.per_fold {
            f.train_time_s = 0.0;
            f.predict_time_s = 0.0;
        }
        out
    }
}

/// Trains `kind` on every row outside `fold`. Validation rows are never read.
pub fn fit_fold(
    x: &FeatureMatrix,
    plan: &FoldPlan,
    fold: usize,
    kind: ClassifierKind,
    params: &SvmParams,
) -> Result<TrainedModel, ClassifierError> {
    let train = x.select(&plan.train_indices(fold));
    classifiers::train(kind, train.values().view(), train.labels(), params)
}

fn run_fold(x: &FeatureMatrix, plan: &FoldPlan, fold: usize, cfg: &CvConfig) -> Result<FoldResult, EvalError> {
    let started = Instant::now();
    let model = fit_fold(x, plan, fold, cfg.classifier, &cfg.svm)?;
    let train_time_s = started.elapsed().as_secs_f64();

    let test = x.select(plan.test_indices(fold));
    let started = Instant::now();
    let predicted: Vec<ClassLabel> = model
        .predict_rows(test.values().view())?
        .into_iter()
        .map(|p| p.label)
        .collect();
    let predict_time_s = started.elapsed().as_secs_f64();

    let confusion = ConfusionMatrix::from_pairs(test.labels().iter().zip(&predicted));
    Ok(FoldResult {
        fold,
        n_train: x.len() - test.len(),
        n_test: test.len(),
        metrics: compute_metrics(&confusion)?,
        confusion,
        train_time_s,
        predict_time_s,
    })
}

/// Stratified k-fold evaluation of one classifier on one feature matrix.
///
/// Folds run in parallel; results are kept in fold order so the report only
/// differs from a sequential run in its timings.
pub fn cross_validate(x: &FeatureMatrix, cfg: &CvConfig) -> Result<EvalReport, EvalError> {
    let plan = stratified_kfold(x.labels(), cfg.k, cfg.seed)?;
    let per_fold = (0..plan.k)
        .into_par_iter()
        .map(|fold| run_fold(x, &plan, fold, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let aggregate = MetricSet::mean(&per_fold.iter().map(|f| f.metrics.clone()).collect::<Vec<_>>());
    Ok(EvalReport {
        config: ConfigEcho {
            backbone: x.backbone().to_string(),
            classifier: cfg.classifier,
            variant: cfg.variant,
            k: cfg.k,
            seed: cfg.seed,
            svm: (cfg.classifier == ClassifierKind::Svm).then(|| cfg.svm.clone()),
        },
        per_fold,
        aggregate,
    })
}
