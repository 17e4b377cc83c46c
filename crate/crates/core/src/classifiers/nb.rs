use std::f64::consts::PI;

use ndarray::{ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{check_inputs, distinct_classes, ClassifierError, Prediction};
use crate::dataset::ClassLabel;

/// Fraction of the largest feature variance added to every class variance.
pub const VAR_SMOOTHING: f64 = 1e-9;

/// Gaussian Naive Bayes parameters. `vars` already include `smoothing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub class_codes: Vec<ClassLabel>,
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub vars: Vec<Vec<f64>>,
    pub smoothing: f64,
}

impl NbModel {
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }
}

fn population_moments(col: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = col.clone().count() as f64;
    let mean = col.clone().sum::<f64>() / n;
    let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Priors are class frequencies; means and population variances per class
/// and feature. Smoothing is `1e-9 × max_j Var(x_j)` over all samples, or
/// `1e-9` when every feature is constant.
pub fn train_nb(x: ArrayView2<'_, f64>, y: &[ClassLabel]) -> Result<NbModel, ClassifierError> {
    check_inputs(x, y)?;
    let n = x.nrows() as f64;
    let max_var = x
        .axis_iter(Axis(1))
        .map(|col| population_moments(col.iter().copied()).1)
        .fold(0.0, f64::max);
    let smoothing = if max_var > 0.0 { VAR_SMOOTHING * max_var } else { VAR_SMOOTHING };

    let classes = distinct_classes(y);
    let mut priors = Vec::with_capacity(classes.len());
    let mut means = Vec::with_capacity(classes.len());
    let mut vars = Vec::with_capacity(classes.len());
    for &class in &classes {
        let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        priors.push(rows.len() as f64 / n);
        let sub = x.select(Axis(0), &rows);
        let (m, v): (Vec<f64>, Vec<f64>) = sub
            .axis_iter(Axis(1))
            .map(|col| {
                let (m, v) = population_moments(col.iter().copied());
                (m, v + smoothing)
            })
            .unzip();
        means.push(m);
        vars.push(v);
    }
    Ok(NbModel {
        class_codes: classes,
        priors,
        means,
        vars,
        smoothing,
    })
}

/// `log prior − ½ Σ_j [log(2π σ²) + (x − μ)² / σ²]` per class.
pub fn predict_nb(m: &NbModel, x: ArrayView1<'_, f64>) -> Result<Prediction, ClassifierError> {
    if x.len() != m.dim() {
        return Err(ClassifierError::DimMismatch {
            expected: m.dim(),
            found: x.len(),
        });
    }
    let scores = m
        .priors
        .iter()
        .zip(m.means.iter().zip(&m.vars))
        .map(|(prior, (mu, var))| {
            let ll: f64 = x
                .iter()
                .zip(mu.iter().zip(var))
                .map(|(&v, (&mu, &var))| (2.0 * PI * var).ln() + (v - mu) * (v - mu) / var)
                .sum();
            prior.ln() - 0.5 * ll
        })
        .collect();
    Ok(Prediction::from_scores(&m.class_codes, scores))
}
