//! Model container `ECM1`, all numbers little-endian:
//!
//! ```text
//! magic     "ECM1"
//! tag       u8   1 = svm, 2 = nb
//! version   u16
//! classes   u32  count, followed by one u8 code per class
//! dim       u64
//! svm:  c_penalty f64, scaler mean[dim], scaler std[dim], weights[classes][dim], biases[classes]
//! nb:   smoothing f64, priors[classes], means[classes][dim], vars[classes][dim]
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::nb::NbModel;
use super::scaler::Scaler;
use super::svm::SvmModel;
use super::{ClassifierError, TrainedModel};
use crate::dataset::ClassLabel;
use crate::fsutil::write_atomic;

pub const MODEL_MAGIC: &[u8; 4] = b"ECM1";
pub const MODEL_FORMAT_VERSION: u16 = 1;

const TAG_SVM: u8 = 1;
const TAG_NB: u8 = 2;

fn put_f64s(w: &mut dyn Write, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), ClassifierError> {
    let (tag, classes, dim) = match model {
        TrainedModel::Svm(m) => (TAG_SVM, &m.class_codes, m.dim()),
        TrainedModel::Nb(m) => (TAG_NB, &m.class_codes, m.dim()),
    };
    write_atomic(path, |w| {
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&[tag])?;
        w.write_all(&MODEL_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(classes.len() as u32).to_le_bytes())?;
        w.write_all(&classes.iter().map(|c| c.code()).collect::<Vec<_>>())?;
        w.write_all(&(dim as u64).to_le_bytes())?;
        match model {
            TrainedModel::Svm(m) => {
                put_f64s(w, &[m.c_penalty])?;
                put_f64s(w, &m.scaler.mean)?;
                put_f64s(w, &m.scaler.std)?;
                for row in &m.weights {
                    put_f64s(w, row)?;
                }
                put_f64s(w, &m.biases)
            }
            TrainedModel::Nb(m) => {
                put_f64s(w, &[m.smoothing])?;
                put_f64s(w, &m.priors)?;
                for row in &m.means {
                    put_f64s(w, row)?;
                }
                for row in &m.vars {
                    put_f64s(w, row)?;
                }
                Ok(())
            }
        }
    })
    .map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Reader<'a> {
    path: &'a Path,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: impl Into<String>) -> ClassifierError {
        ClassifierError::Format {
            path: self.path.to_path_buf(),
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ClassifierError> {
        match self.pos.checked_add(n).filter(|&e| e <= self.buf.len()) {
            Some(end) => {
                let out = &self.buf[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(self.err(format!("truncated at byte {}", self.pos))),
        }
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ClassifierError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.err("size overflow"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Vec<Vec<f64>>, ClassifierError> {
        (0..rows).map(|_| self.f64s(cols)).collect()
    }
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ClassifierError> {
    let buf = fs::read(path).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = Reader { path, buf: &buf, pos: 0 };
    if r.take(4).ok() != Some(&MODEL_MAGIC[..]) {
        return Err(r.err("bad magic"));
    }
    let tag = r.take(1)?[0];
    let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    if version != MODEL_FORMAT_VERSION {
        return Err(ClassifierError::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let n_classes = u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize;
    let codes = r.take(n_classes)?;
    let class_codes = codes
        .iter()
        .map(|&c| ClassLabel::from_code(c).ok_or_else(|| r.err(format!("bad class code {c}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let dim = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
    if dim > buf.len() {
        return Err(r.err("dimension exceeds file size"));
    }
    let model = match tag {
        TAG_SVM => {
            let c_penalty = r.f64s(1)?[0];
            let mean = r.f64s(dim)?;
            let std = r.f64s(dim)?;
            let weights = r.matrix(n_classes, dim)?;
            let biases = r.f64s(n_classes)?;
            TrainedModel::Svm(SvmModel {
                class_codes,
                weights,
                biases,
                c_penalty,
                scaler: Scaler { mean, std },
            })
        }
        TAG_NB => {
            let smoothing = r.f64s(1)?[0];
            let priors = r.f64s(n_classes)?;
            let means = r.matrix(n_classes, dim)?;
            let vars = r.matrix(n_classes, dim)?;
            TrainedModel::Nb(NbModel {
                class_codes,
                priors,
                means,
                vars,
                smoothing,
            })
        }
        other => return Err(r.err(format!("unknown model type tag {other}"))),
    };
    if r.pos != buf.len() {
        return Err(r.err("trailing bytes"));
    }
    Ok(model)
}

/// Human-readable dump; not the interchange format.
pub fn model_to_json(model: &TrainedModel) -> String {
    serde_json::to_string_pretty(model).expect("models serialise")
}

pub fn model_from_json(text: &str) -> Result<TrainedModel, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn save_model_json(model: &TrainedModel, path: &Path) -> Result<(), ClassifierError> {
    let text = model_to_json(model);
    write_atomic(path, |w| w.write_all(text.as_bytes())).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{train_nb, train_svm, SvmParams};
    use ndarray::{array, Array2};
    use tempfile::TempDir;

    fn data() -> (Array2<f64>, Vec<ClassLabel>) {
        let x = array![
            [0.0, 1.0, 0.3],
            [0.2, 1.1, -0.1],
            [3.0, -1.0, 0.5],
            [3.1, -0.7, 0.2],
            [-2.0, 4.0, 1.0],
            [-2.2, 3.5, 0.9]
        ];
        let y = [0, 0, 1, 1, 2, 2].map(|c| ClassLabel::from_code(c).unwrap()).to_vec();
        (x, y)
    }

    #[test]
    fn svm_round_trip_preserves_predictions() {
        let dir = TempDir::new().unwrap();
        let (x, y) = data();
        let model = TrainedModel::Svm(train_svm(x.view(), &y, &SvmParams::default()).unwrap());
        let path = dir.path().join("m.ecm");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        let probe = array![[0.5, 0.5, 0.5], [10.0, -3.0, 0.0], [-1.0, 2.0, 7.0]];
        assert_eq!(model.predict_rows(probe.view()).unwrap(), back.predict_rows(probe.view()).unwrap());
    }

    #[test]
    fn nb_round_trip_is_bit_exact() {
        let dir = TempDir::new().unwrap();
        let (x, y) = data();
        let nb = train_nb(x.view(), &y).unwrap();
        let path = dir.path().join("m.ecm");
        save_model(&TrainedModel::Nb(nb.clone()), &path).unwrap();
        let TrainedModel::Nb(back) = load_model(&path).unwrap() else {
            panic!("wrong model type")
        };
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.priors), bits(&nb.priors));
        for c in 0..3 {
            assert_eq!(bits(&back.means[c]), bits(&nb.means[c]));
            assert_eq!(bits(&back.vars[c]), bits(&nb.vars[c]));
        }
        assert_eq!(back.smoothing.to_bits(), nb.smoothing.to_bits());
    }

    #[test]
    fn wrong_magic_version_and_truncation() {
        let dir = TempDir::new().unwrap();
        let (x, y) = data();
        let path = dir.path().join("m.ecm");
        save_model(&TrainedModel::Nb(train_nb(x.view(), &y).unwrap()), &path).unwrap();
        let bytes = fs::read(&path).unwrap();

        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"EFM1");
        fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(ClassifierError::Format { .. })));

        let mut bad = bytes.clone();
        bad[5] = 9;
        fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(ClassifierError::VersionMismatch { found: 9, .. })));

        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_model(&path), Err(ClassifierError::Format { .. })));
    }

    #[test]
    fn json_dump_round_trips() {
        let (x, y) = data();
        let model = TrainedModel::Nb(train_nb(x.view(), &y).unwrap());
        let text = model_to_json(&model);
        assert!(text.contains("\"type\": \"nb\""));
        assert_eq!(model_from_json(&text).unwrap(), model);
    }
}
