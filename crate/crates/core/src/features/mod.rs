//! Image featurization and feature caches.

mod backbone;
mod builtin;
mod cache;
mod cnn;
mod resize;

use std::path::PathBuf;

use ndarray::{Array2, ArrayView1, Axis};
use thiserror::Error;

use crate::dataset::{ClassLabel, Dataset};

pub use backbone::{Backbone, BackboneSpec, Layout, Sidecar, IMAGENET_MEAN, IMAGENET_SCALE};
pub use builtin::{extract_builtin, grayscale, BUILTIN_DIM, HISTOGRAM_BINS, MOMENT_COUNT, THUMBNAIL_SIDE};
pub use cache::{load_features, load_features_csv, save_features, save_features_csv, BINARY_MAGIC};
pub use cnn::{extract_cnn, CnnExtractor};
pub use resize::{resize_bilinear, resize_plane};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot load model {}: {reason}", path.display())]
    ModelLoad { path: PathBuf, reason: String },
    #[error("dimension mismatch ({context}): expected {expected}, found {found}")]
    DimMismatch {
        expected: usize,
        found: usize,
        context: String,
    },
    #[error("inference failed on `{image_id}`: {reason}")]
    Inference { image_id: String, reason: String },
    #[error("non-finite feature value for `{image_id}`")]
    NonFinite { image_id: String },
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad feature file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
}

/// One image's descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub backbone: String,
    pub image_id: String,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Row-aligned feature vectors, labels and image ids for one backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    backbone: String,
    ids: Vec<String>,
    labels: Vec<ClassLabel>,
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn empty(backbone: impl Into<String>, dim: usize) -> Self {
        FeatureMatrix {
            backbone: backbone.into(),
            ids: Vec::new(),
            labels: Vec::new(),
            values: Array2::zeros((0, dim)),
        }
    }

    /// Assembles a matrix, rejecting ragged rows, length mismatches and non-finite values.
    pub fn new(
        backbone: impl Into<String>,
        ids: Vec<String>,
        labels: Vec<ClassLabel>,
        values: Array2<f64>,
    ) -> Result<Self, FeatureError> {
        if ids.len() != values.nrows() || labels.len() != values.nrows() {
            return Err(FeatureError::DimMismatch {
                expected: values.nrows(),
                found: ids.len().min(labels.len()),
                context: "row metadata".into(),
            });
        }
        if let Some((i, _)) = values
            .axis_iter(Axis(0))
            .enumerate()
            .find(|(_, row)| row.iter().any(|v| !v.is_finite()))
        {
            return Err(FeatureError::NonFinite {
                image_id: ids[i].clone(),
            });
        }
        Ok(FeatureMatrix {
            backbone: backbone.into(),
            ids,
            labels,
            values,
        })
    }

    /// Stacks vectors in the given order.
    pub fn from_vectors(
        backbone: impl Into<String>,
        dim: usize,
        rows: Vec<FeatureVector>,
        labels: Vec<ClassLabel>,
    ) -> Result<Self, FeatureError> {
        let mut values = Array2::zeros((rows.len(), dim));
        let mut ids = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.dim() != dim {
                return Err(FeatureError::DimMismatch {
                    expected: dim,
                    found: row.dim(),
                    context: format!("row `{}`", row.image_id),
                });
            }
            values.row_mut(i).assign(&ArrayView1::from(&row.values[..]));
            ids.push(row.image_id);
        }
        FeatureMatrix::new(backbone, ids, labels, values)
    }

    pub fn backbone(&self) -> &str {
        &self.backbone
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn vector(&self, i: usize) -> FeatureVector {
        FeatureVector {
            values: self.values.row(i).to_vec(),
            backbone: self.backbone.clone(),
            image_id: self.ids[i].clone(),
        }
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            backbone: self.backbone.clone(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            values: self.values.select(Axis(0), indices),
        }
    }
}

/// Dispatches to the built-in extractor or the CNN adapter.
pub fn extract(ds: &Dataset, spec: &BackboneSpec) -> Result<FeatureMatrix, FeatureError> {
    match spec.backbone {
        Backbone::Builtin => Ok(extract_builtin(ds)),
        _ => extract_cnn(ds, spec),
    }
}
