use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::ClassifierError;

/// Lower clamp for per-feature standard deviations.
pub const STD_FLOOR: f64 = 1e-12;

/// Per-feature standardisation `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Leaves values untouched.
    pub fn identity(dim: usize) -> Self {
        Scaler {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        Zip::from(&x)
            .and(&self.mean[..])
            .and(&self.std[..])
            .map_collect(|&v, &m, &s| (v - m) / s)
    }
}

/// Column means and population standard deviations, std clamped to [`STD_FLOOR`].
pub fn fit_scaler(x: ArrayView2<'_, f64>) -> Result<Scaler, ClassifierError> {
    let n = x.nrows();
    if n == 0 {
        return Err(ClassifierError::EmptyInput);
    }
    let mut mean = Vec::with_capacity(x.ncols());
    let mut std = Vec::with_capacity(x.ncols());
    for col in x.axis_iter(Axis(1)) {
        // shifting by the first value keeps constant columns exact
        let pivot = col[0];
        let m = pivot + col.iter().map(|&v| v - pivot).sum::<f64>() / n as f64;
        let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        mean.push(m);
        std.push(var.sqrt().max(STD_FLOOR));
    }
    Ok(Scaler { mean, std })
}

pub fn apply_scaler(scaler: &Scaler, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        Zip::from(&mut row)
            .and(&scaler.mean[..])
            .and(&scaler.std[..])
            .for_each(|v, &m, &s| *v = (*v - m) / s);
    }
    out
}
