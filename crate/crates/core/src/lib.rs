//! Low-footprint erythrocyte classification.
//!
//! Fixed CNN backbones (or a built-in descriptor) turn cell images into
//! dense feature vectors; a one-vs-rest linear SVM and a Gaussian Naive
//! Bayes classifier are trained on those vectors and scored with stratified
//! k-fold cross-validation.
//!
//! The crate is organised as a pipeline:
//!
//! * [`dataset`] loads `<root>/<variant>/<class>/*.{jpg,png}` into a [`Dataset`].
//! * [`features`] maps a dataset to a [`FeatureMatrix`] and caches it on disk.
//! * [`classifiers`] trains and applies [`SvmModel`] and [`NbModel`].
//! * [`eval`] builds fold plans, confusion matrices and metric sets.
//! * [`report`] renders experiment grids as JSON, CSV and pipe tables.

pub mod classifiers;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod report;
pub mod synthetic;

mod fsutil;

pub use fsutil::write_atomic;

pub use classifiers::{ClassifierKind, NbModel, Prediction, SvmModel, SvmParams, TrainedModel};
pub use dataset::{ClassLabel, Dataset, ImageVariant, LabeledImage};
pub use eval::{ConfusionMatrix, EvalReport, FoldPlan, MetricSet};
pub use features::{BackboneSpec, FeatureMatrix, FeatureVector};
pub use report::ExperimentGrid;
