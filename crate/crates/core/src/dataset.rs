//! Corpus ingestion.
//!
//! The on-disk layout is `<root>/<variant>/<class>/<file>` where `variant` is
//! `original` or `segmented` and `class` is one of `normal`, `sickle`,
//! `other`. An optional `<root>/manifest.json` declares the expected number
//! of images per class.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";

const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing directory: {}", .0.display())]
    MissingDirectory(PathBuf),
    #[error("cannot decode {}: {source}", path.display())]
    DecodeError {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(ManifestReport),
    #[error("invalid manifest {}: {reason}", path.display())]
    BadManifest { path: PathBuf, reason: String },
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Cell class. Integer codes are stable and define the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Normal = 0,
    Sickle = 1,
    #[serde(rename = "other")]
    OtherDeformation = 2,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Normal, ClassLabel::Sickle, ClassLabel::OtherDeformation];
    pub const COUNT: usize = 3;

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<ClassLabel> {
        ClassLabel::ALL.get(code as usize).copied()
    }

    /// Directory name used in the corpus layout.
    pub fn dir_name(self) -> &'static str {
        match self {
            ClassLabel::Normal => "normal",
            ClassLabel::Sickle => "sickle",
            ClassLabel::OtherDeformation => "other",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" | "0" => Ok(ClassLabel::Normal),
            "sickle" | "1" => Ok(ClassLabel::Sickle),
            "other" | "2" => Ok(ClassLabel::OtherDeformation),
            _ => Err(format!("unknown class label `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageVariant {
    Original,
    Segmented,
}

impl ImageVariant {
    pub const ALL: [ImageVariant; 2] = [ImageVariant::Original, ImageVariant::Segmented];

    pub fn dir_name(self) -> &'static str {
        match self {
            ImageVariant::Original => "original",
            ImageVariant::Segmented => "segmented",
        }
    }
}

impl fmt::Display for ImageVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl FromStr for ImageVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(ImageVariant::Original),
            "segmented" => Ok(ImageVariant::Segmented),
            _ => Err(format!("unknown image variant `{s}`")),
        }
    }
}

/// A decoded 8-bit RGB cell image.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    /// Path relative to the variant directory, `/`-separated, e.g. `sickle/img_012.jpg`.
    pub id: String,
    pub pixels: RgbImage,
    pub label: ClassLabel,
    pub variant: ImageVariant,
}

/// Expected image count per class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub normal: usize,
    pub sickle: usize,
    pub other: usize,
}

impl ClassCounts {
    pub fn new(normal: usize, sickle: usize, other: usize) -> Self {
        ClassCounts { normal, sickle, other }
    }

    pub fn get(&self, label: ClassLabel) -> usize {
        match label {
            ClassLabel::Normal => self.normal,
            ClassLabel::Sickle => self.sickle,
            ClassLabel::OtherDeformation => self.other,
        }
    }

    fn get_mut(&mut self, label: ClassLabel) -> &mut usize {
        match label {
            ClassLabel::Normal => &mut self.normal,
            ClassLabel::Sickle => &mut self.sickle,
            ClassLabel::OtherDeformation => &mut self.other,
        }
    }

    pub fn total(&self) -> usize {
        self.normal + self.sickle + self.other
    }

    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a ClassLabel>) -> Self {
        let mut counts = ClassCounts::default();
        for &label in labels {
            *counts.get_mut(label) += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassCheck {
    pub class: ClassLabel,
    pub found: usize,
    pub expected: usize,
}

/// Per-class found-vs-expected comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestReport {
    pub checks: Vec<ClassCheck>,
    pub ok: bool,
}

impl ManifestReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &ClassCheck> {
        self.checks.iter().filter(|c| c.found != c.expected)
    }
}

impl fmt::Display for ManifestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .mismatches()
            .map(|c| format!("{}: found {} expected {}", c.class, c.found, c.expected))
            .collect();
        if parts.is_empty() {
            f.write_str("all class counts match")
        } else {
            f.write_str(&parts.join(", "))
        }
    }
}

/// Immutable, id-ordered collection of labeled images.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    records: Vec<LabeledImage>,
    manifest: Option<ClassCounts>,
}

impl Dataset {
    /// Builds a dataset from in-memory records. Records are sorted by id.
    ///
    /// Panics if two records share an id.
    pub fn from_records(mut records: Vec<LabeledImage>, manifest: Option<ClassCounts>) -> Self {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in records.windows(2) {
            assert!(pair[0].id != pair[1].id, "duplicate image id `{}`", pair[0].id);
        }
        Dataset { records, manifest }
    }

    pub fn records(&self) -> &[LabeledImage] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn manifest(&self) -> Option<ClassCounts> {
        self.manifest
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn class_counts(&self) -> ClassCounts {
        ClassCounts::from_labels(self.records.iter().map(|r| &r.label))
    }

    /// SHA-256 over ids, labels, variants, dimensions and pixel bytes, in record order.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for r in &self.records {
            hasher.update((r.id.len() as u64).to_le_bytes());
            hasher.update(r.id.as_bytes());
            hasher.update([r.label.code(), r.variant as u8]);
            hasher.update(r.pixels.width().to_le_bytes());
            hasher.update(r.pixels.height().to_le_bytes());
            hasher.update(r.pixels.as_raw());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Loads every image of `variant` under `root`.
///
/// Decoding runs in parallel; the result is sorted by id and therefore
/// identical to a sequential load.
pub fn load_dataset(root: &Path, variant: ImageVariant) -> Result<Dataset, DatasetError> {
    let variant_dir = root.join(variant.dir_name());
    let mut files: Vec<(String, PathBuf, ClassLabel)> = Vec::new();
    for label in ClassLabel::ALL {
        let class_dir = variant_dir.join(label.dir_name());
        if !class_dir.is_dir() {
            return Err(DatasetError::MissingDirectory(class_dir));
        }
        let entries = fs::read_dir(&class_dir).map_err(|source| DatasetError::Io {
            path: class_dir.clone(),
            source,
        })?;
        for entry in entries {
            let entry = entry.map_err(|source| DatasetError::Io {
                path: class_dir.clone(),
                source,
            })?;
            let path = entry.path();
            if !path.is_file() || !has_image_extension(&path) {
                continue;
            }
            let name = entry.file_name().to_string_lossy().into_owned();
            files.push((format!("{}/{}", label.dir_name(), name), path, label));
        }
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));

    let records = files
        .into_par_iter()
        .map(|(id, path, label)| {
            let pixels = image::open(&path)
                .map_err(|source| DatasetError::DecodeError { path, source })?
                .to_rgb8();
            Ok(LabeledImage {
                id,
                pixels,
                label,
                variant,
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;

    let manifest = read_manifest(root)?;
    let dataset = Dataset::from_records(records, manifest);
    if let Some(expected) = manifest {
        let report = validate_manifest(&dataset, &expected);
        if !report.ok {
            return Err(DatasetError::ManifestMismatch(report));
        }
    }
    Ok(dataset)
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Reads `<root>/manifest.json` if present.
pub fn read_manifest(root: &Path) -> Result<Option<ClassCounts>, DatasetError> {
    let path = root.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|source| DatasetError::Io {
        path: path.clone(),
        source,
    })?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| DatasetError::BadManifest {
            path,
            reason: e.to_string(),
        })
}

/// Compares the dataset's class counts with `expected`.
pub fn validate_manifest(ds: &Dataset, expected: &ClassCounts) -> ManifestReport {
    let found = ds.class_counts();
    let checks: Vec<ClassCheck> = ClassLabel::ALL
        .iter()
        .map(|&class| ClassCheck {
            class,
            found: found.get(class),
            expected: expected.get(class),
        })
        .collect();
    let ok = checks.iter().all(|c| c.found == c.expected);
    ManifestReport { checks, ok }
}

/// Counts per class code, in code order.
pub fn counts_by_code(labels: &[ClassLabel]) -> BTreeMap<u8, usize> {
    let mut counts = BTreeMap::new();
    for l in labels {
        *counts.entry(l.code()).or_insert(0) += 1;
    }
    counts
}
