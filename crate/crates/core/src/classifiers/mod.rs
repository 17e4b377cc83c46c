//! Classical classifiers over feature matrices.

mod io;
mod nb;
mod scaler;
mod svm;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ClassLabel;

pub use io::{load_model, model_from_json, model_to_json, save_model, save_model_json, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use nb::{predict_nb, train_nb, NbModel, VAR_SMOOTHING};
pub use scaler::{apply_scaler, fit_scaler, Scaler, STD_FLOOR};
pub use svm::{dual_objective, predict_svm, solve_binary, train_svm, BinarySolution, SvmModel, SvmParams};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("empty input")]
    EmptyInput,
    #[error("training data contains a single class")]
    SingleClassInput,
    #[error("non-finite feature at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("DimMismatch: model expects {expected} features, input has {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad model file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("model file {} has format version {found}, expected {expected}", path.display())]
    VersionMismatch { path: PathBuf, found: u16, expected: u16 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Nb,
    Svm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 2] = [ClassifierKind::Nb, ClassifierKind::Svm];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Nb => "nb",
            ClassifierKind::Svm => "svm",
        }
    }

    /// Column heading used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            ClassifierKind::Nb => "Bayes",
            ClassifierKind::Svm => "SVM",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nb" | "bayes" => Ok(ClassifierKind::Nb),
            "svm" => Ok(ClassifierKind::Svm),
            _ => Err(format!("unknown classifier `{s}` (expected svm or nb)")),
        }
    }
}

/// Decision values per class and the winning label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: ClassLabel,
    /// Aligned with the model's class list (ascending code).
    pub classes: Vec<ClassLabel>,
    pub scores: Vec<f64>,
}

impl Prediction {
    pub(crate) fn from_scores(classes: &[ClassLabel], scores: Vec<f64>) -> Self {
        let best = argmax_lowest(&scores);
        Prediction {
            label: classes[best],
            classes: classes.to_vec(),
            scores,
        }
    }

    /// Score for `class`, if the model knows it.
    pub fn score(&self, class: ClassLabel) -> Option<f64> {
        self.classes.iter().position(|&c| c == class).map(|i| self.scores[i])
    }
}

/// Index of the maximum; ties go to the lowest index.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Sorted distinct labels.
pub(crate) fn distinct_classes(y: &[ClassLabel]) -> Vec<ClassLabel> {
    let mut classes = y.to_vec();
    classes.sort();
    classes.dedup();
    classes
}

pub(crate) fn check_inputs(x: ArrayView2<'_, f64>, y: &[ClassLabel]) -> Result<(), ClassifierError> {
    if x.nrows() != y.len() {
        return Err(ClassifierError::LengthMismatch {
            rows: x.nrows(),
            labels: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(ClassifierError::EmptyInput);
    }
    if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(ClassifierError::NonFiniteFeature { row, col });
    }
    Ok(())
}

/// Either trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TrainedModel {
    Svm(SvmModel),
    Nb(NbModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            TrainedModel::Svm(_) => ClassifierKind::Svm,
            TrainedModel::Nb(_) => ClassifierKind::Nb,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::Svm(m) => m.dim(),
            TrainedModel::Nb(m) => m.dim(),
        }
    }

    pub fn classes(&self) -> &[ClassLabel] {
        match self {
            TrainedModel::Svm(m) => &m.class_codes,
            TrainedModel::Nb(m) => &m.class_codes,
        }
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<Prediction, ClassifierError> {
        match self {
            TrainedModel::Svm(m) => predict_svm(m, x),
            TrainedModel::Nb(m) => predict_nb(m, x),
        }
    }

    pub fn predict_rows(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Prediction>, ClassifierError> {
        x.rows().into_iter().map(|row| self.predict(row)).collect()
    }
}

/// Trains `kind` on raw (unscaled) features.
pub fn train(
    kind: ClassifierKind,
    x: ArrayView2<'_, f64>,
    y: &[ClassLabel],
    params: &SvmParams,
) -> Result<TrainedModel, ClassifierError> {
    match kind {
        ClassifierKind::Svm => train_svm(x, y, params).map(TrainedModel::Svm),
        ClassifierKind::Nb => train_nb(x, y).map(TrainedModel::Nb),
    }
}
