use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::builtin::BUILTIN_DIM;
use super::FeatureError;

pub const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_SCALE: [f32; 3] = [0.229, 0.224, 0.225];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    #[serde(rename = "densenet169")]
    DenseNet169,
    #[serde(rename = "resnet50")]
    ResNet50,
    #[serde(rename = "mobilenet")]
    MobileNet,
    Builtin,
}

impl Backbone {
    pub const ALL: [Backbone; 4] = [
        Backbone::DenseNet169,
        Backbone::ResNet50,
        Backbone::MobileNet,
        Backbone::Builtin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Backbone::DenseNet169 => "densenet169",
            Backbone::ResNet50 => "resnet50",
            Backbone::MobileNet => "mobilenet",
            Backbone::Builtin => "builtin",
        }
    }

    /// Declared flattened feature length of each backbone.
    pub fn registry_dim(self) -> usize {
        match self {
            Backbone::DenseNet169 => 232_736,
            Backbone::ResNet50 => 90_947,
            Backbone::MobileNet => 33_792,
            Backbone::Builtin => BUILTIN_DIM,
        }
    }

    pub fn is_cnn(self) -> bool {
        self != Backbone::Builtin
    }
}

impl fmt::Display for Backbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backbone {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Backbone::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown backbone `{s}` (expected densenet169, resnet50, mobilenet or builtin)"))
    }
}

/// Tensor layout of the model input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Nchw,
    Nhwc,
}

/// Metadata written next to every exported model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub name: String,
    pub feature_dim: usize,
    pub input_size: [usize; 2],
    pub layout: Layout,
    pub mean: [f32; 3],
    pub scale: [f32; 3],
}

/// Everything needed to featurize images with one backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneSpec {
    pub backbone: Backbone,
    pub feature_dim: usize,
    /// `(height, width)`
    pub input_size: (usize, usize),
    pub layout: Layout,
    pub mean: [f32; 3],
    pub scale: [f32; 3],
    pub model_path: Option<PathBuf>,
}

impl BackboneSpec {
    /// Registry defaults: declared feature dims, 224×224 input, NCHW, ImageNet normalisation.
    pub fn registry(backbone: Backbone) -> Self {
        BackboneSpec {
            backbone,
            feature_dim: backbone.registry_dim(),
            input_size: (224, 224),
            layout: Layout::Nchw,
            mean: IMAGENET_MEAN,
            scale: IMAGENET_SCALE,
            model_path: None,
        }
    }

    pub fn name(&self) -> &'static str {
        self.backbone.name()
    }

    /// Candidate model file paths inside `dir`, in lookup order.
    pub fn model_candidates(backbone: Backbone, dir: &Path) -> [PathBuf; 2] {
        [
            dir.join(format!("{}.model", backbone.name())),
            dir.join(format!("{}.onnx", backbone.name())),
        ]
    }

    /// Resolves a CNN backbone inside `dir`: `<name>.model` (or `<name>.onnx`)
    /// plus an optional `<name>.json` sidecar, which overrides the registry
    /// defaults when present.
    pub fn from_model_dir(backbone: Backbone, dir: &Path) -> Result<Self, FeatureError> {
        let mut spec = BackboneSpec::registry(backbone);
        if !backbone.is_cnn() {
            return Ok(spec);
        }
        let candidates = Self::model_candidates(backbone, dir);
        let model = candidates
            .iter()
            .find(|p| p.is_file())
            .ok_or_else(|| FeatureError::ModelLoad {
                path: candidates[0].clone(),
                reason: "model file not found".into(),
            })?;
        spec.model_path = Some(model.clone());
        let sidecar_path = dir.join(format!("{}.json", backbone.name()));
        if sidecar_path.is_file() {
            let sidecar = read_sidecar(&sidecar_path)?;
            if sidecar.name != backbone.name() {
                return Err(FeatureError::Format {
                    path: sidecar_path,
                    reason: format!("sidecar names `{}`, expected `{}`", sidecar.name, backbone.name()),
                });
            }
            spec.apply_sidecar(&sidecar);
        }
        Ok(spec)
    }

    pub fn apply_sidecar(&mut self, sidecar: &Sidecar) {
        self.feature_dim = sidecar.feature_dim;
        self.input_size = (sidecar.input_size[0], sidecar.input_size[1]);
        self.layout = sidecar.layout;
        self.mean = sidecar.mean;
        self.scale = sidecar.scale;
    }

    pub fn to_sidecar(&self) -> Sidecar {
        Sidecar {
            name: self.name().to_string(),
            feature_dim: self.feature_dim,
            input_size: [self.input_size.0, self.input_size.1],
            layout: self.layout,
            mean: self.mean,
            scale: self.scale,
        }
    }
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar, FeatureError> {
    let text = fs::read_to_string(path).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| FeatureError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if sidecar.feature_dim == 0 || sidecar.input_size.contains(&0) {
        return Err(FeatureError::Format {
            path: path.to_path_buf(),
            reason: "feature_dim and input_size must be positive".into(),
        });
    }
    if sidecar.scale.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return Err(FeatureError::Format {
            path: path.to_path_buf(),
            reason: "scale entries must be finite and non-zero".into(),
        });
    }
    Ok(sidecar)
}
