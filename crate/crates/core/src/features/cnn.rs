//! ONNX backbone adapter.

use std::path::Path;
use std::sync::Arc;

use image::RgbImage;
use ndarray::Array2;
use rayon::prelude::*;
use tract_onnx::prelude::*;

use super::backbone::{BackboneSpec, Layout};
use super::resize::resize_bilinear;
use super::{FeatureError, FeatureMatrix};
use crate::dataset::Dataset;

type Plan = Arc<TypedRunnableModel>;

/// A loaded backbone, fixed to batch size 1 at the spec's input size.
pub struct CnnExtractor {
    spec: BackboneSpec,
    plan: Plan,
}

impl std::fmt::Debug for CnnExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CnnExtractor").field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl CnnExtractor {
    pub fn load(spec: &BackboneSpec) -> Result<Self, FeatureError> {
        let path = spec.model_path.as_deref().ok_or_else(|| FeatureError::ModelLoad {
            path: Default::default(),
            reason: format!("no model file configured for `{}`", spec.name()),
        })?;
        let plan = load_plan(path, spec).map_err(|e| FeatureError::ModelLoad {
            path: path.to_path_buf(),
            reason: format!("{e:#}"),
        })?;
        Ok(CnnExtractor { spec: spec.clone(), plan })
    }

    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    /// Resize, scale to `[0, 1]`, normalise per channel and lay out as the model expects.
    pub fn input_tensor(&self, img: &RgbImage) -> Tensor {
        let (h, w) = self.spec.input_size;
        let resized = resize_bilinear(img, (h, w));
        let norm = |y: usize, x: usize, c: usize| {
            (resized[[y, x, c]] / 255.0 - self.spec.mean[c]) / self.spec.scale[c]
        };
        match self.spec.layout {
            Layout::Nchw => {
                tract_ndarray::Array4::from_shape_fn((1, 3, h, w), |(_, c, y, x)| norm(y, x, c)).into()
            }
            Layout::Nhwc => {
                tract_ndarray::Array4::from_shape_fn((1, h, w, 3), |(_, y, x, c)| norm(y, x, c)).into()
            }
        }
    }

    /// Features of one image; fails on a length other than `feature_dim` or on NaN/inf.
    pub fn features(&self, image_id: &str, img: &RgbImage) -> Result<Vec<f64>, FeatureError> {
        let input = self.input_tensor(img);
        let outputs = self
            .plan
            .run(tvec!(input.into()))
            .map_err(|e| FeatureError::Inference {
                image_id: image_id.to_string(),
                reason: format!("{e:#}"),
            })?;
        let out = outputs.first().ok_or_else(|| FeatureError::Inference {
            image_id: image_id.to_string(),
            reason: "model produced no output".into(),
        })?;
        let view = out.to_plain_array_view::<f32>().map_err(|e| FeatureError::Inference {
            image_id: image_id.to_string(),
            reason: format!("{e:#}"),
        })?;
        if view.len() != self.spec.feature_dim {
            return Err(FeatureError::DimMismatch {
                expected: self.spec.feature_dim,
                found: view.len(),
                context: format!("output of `{}` model", self.spec.name()),
            });
        }
        if view.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                image_id: image_id.to_string(),
            });
        }
        Ok(view.iter().map(|&v| v as f64).collect())
    }

    /// Features for every record, gathered in dataset order.
    pub fn extract(&self, ds: &Dataset) -> Result<FeatureMatrix, FeatureError> {
        let rows: Vec<Vec<f64>> = ds
            .records()
            .par_iter()
            .map(|r| self.features(&r.id, &r.pixels))
            .collect::<Result<_, _>>()?;
        let dim = self.spec.feature_dim;
        let mut values = Array2::zeros((rows.len(), dim));
        for (i, row) in rows.into_iter().enumerate() {
            values.row_mut(i).assign(&ndarray::Array1::from(row));
        }
        let ids = ds.records().iter().map(|r| r.id.clone()).collect();
        FeatureMatrix::new(self.spec.name(), ids, ds.labels(), values)
    }
}

fn load_plan(path: &Path, spec: &BackboneSpec) -> TractResult<Plan> {
    let (h, w) = spec.input_size;
    let shape = match spec.layout {
        Layout::Nchw => [1, 3, h, w],
        Layout::Nhwc => [1, h, w, 3],
    };
    tract_onnx::onnx()
        .model_for_path(path)?
        .with_input_fact(0, f32::fact(shape).into())?
        .into_optimized()?
        .into_runnable()
}

/// Runs `spec`'s model over the dataset.
///
/// An empty dataset yields an empty matrix without touching the model file.
pub fn extract_cnn(ds: &Dataset, spec: &BackboneSpec) -> Result<FeatureMatrix, FeatureError> {
    if ds.is_empty() {
        return Ok(FeatureMatrix::empty(spec.name(), spec.feature_dim));
    }
    CnnExtractor::load(spec)?.extract(ds)
}
