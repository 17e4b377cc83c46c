//! One-vs-rest linear SVM trained by dual coordinate descent.
//!
//! Each binary subproblem is the L2-regularised L1-hinge SVM
//!
//! ```text
//! min_w  ½‖w‖² + C Σ max(0, 1 − yᵢ (w·xᵢ + b))
//! ```
//!
//! with the bias folded into `w` by appending a constant 1 to every sample
//! (so the bias is regularised too). The dual
//! `max_α Σαᵢ − ½‖Σ αᵢ yᵢ x̃ᵢ‖²` subject to `0 ≤ αᵢ ≤ C` has no equality
//! constraint, and each coordinate step is a closed-form clipped Newton step.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scaler::{apply_scaler, fit_scaler, Scaler};
use super::{check_inputs, distinct_classes, ClassifierError, Prediction};
use crate::dataset::ClassLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c_penalty: f64,
    pub tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c_penalty: 2.9,
            tol: 1e-4,
            max_epochs: 1000,
            seed: 42,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub class_codes: Vec<ClassLabel>,
    /// One weight vector per class, in the scaler's output space.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub c_penalty: f64,
    pub scaler: Scaler,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.scaler.dim()
    }
}

/// Result of one binary subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub alphas: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
    /// Dual objective at the start and after every epoch.
    pub dual_objective: Vec<f64>,
}

/// `Σα − ½‖w̃‖²` for a primal/dual pair.
pub fn dual_objective(alphas: &[f64], weights: &[f64], bias: f64) -> f64 {
    let norm2: f64 = weights.iter().map(|w| w * w).sum::<f64>() + bias * bias;
    alphas.iter().sum::<f64>() - 0.5 * norm2
}

/// Solves one binary problem; `y` entries must be `+1.0` or `-1.0`.
///
/// Samples are visited in a fresh seeded permutation every epoch. Training
/// stops once the largest projected-gradient magnitude of an epoch drops
/// below `tol`, or after `max_epochs`.
pub fn solve_binary(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    c_penalty: f64,
    tol: f64,
    max_epochs: usize,
    seed: u64,
) -> BinarySolution {
    let (n, d) = x.dim();
    assert_eq!(n, y.len(), "label count");
    assert!(c_penalty > 0.0, "C must be positive");
    let mut w = Array1::<f64>::zeros(d);
    let mut b = 0.0;
    let mut alpha = vec![0.0; n];
    // diagonal of Q: ‖x̃ᵢ‖² = ‖xᵢ‖² + 1
    let qdiag: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r) + 1.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = vec![0.0];
    let mut epochs = 0;
    let mut converged = false;

    while epochs < max_epochs {
        order.shuffle(&mut rng);
        let mut max_violation: f64 = 0.0;
        for &i in &order {
            let xi = x.row(i);
            let yi = y[i];
            let grad = yi * (w.dot(&xi) + b) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                grad.min(0.0)
            } else if alpha[i] >= c_penalty {
                grad.max(0.0)
            } else {
                grad
            };
            max_violation = max_violation.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                let new = (old - grad / qdiag[i]).clamp(0.0, c_penalty);
                let step = (new - old) * yi;
                if step != 0.0 {
                    w.scaled_add(step, &xi);
                    b += step;
                }
                alpha[i] = new;
            }
        }
        epochs += 1;
        let objective = dual_objective(&alpha, w.as_slice().unwrap(), b);
        debug_assert!(
            objective >= history.last().unwrap() - 1e-9 * objective.abs().max(1.0),
            "dual objective decreased: {} -> {objective}",
            history.last().unwrap()
        );
        history.push(objective);
        if max_violation < tol {
            converged = true;
            break;
        }
    }

    BinarySolution {
        weights: w.to_vec(),
        bias: b,
        alphas: alpha,
        epochs,
        converged,
        dual_objective: history,
    }
}

/// Trains one binary machine per class present in `y` on raw features.
///
/// With `params.standardize` the scaler is fitted on `x`; otherwise an
/// identity scaler is stored.
pub fn train_svm(x: ArrayView2<'_, f64>, y: &[ClassLabel], params: &SvmParams) -> Result<SvmModel, ClassifierError> {
    check_inputs(x, y)?;
    let classes = distinct_classes(y);
    if classes.len() < 2 {
        return Err(ClassifierError::SingleClassInput);
    }
    let scaler = if params.standardize {
        fit_scaler(x)?
    } else {
        Scaler::identity(x.ncols())
    };
    let xs = apply_scaler(&scaler, x);
    let solutions: Vec<BinarySolution> = classes
        .par_iter()
        .map(|&class| {
            let targets: Vec<f64> = y.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            let seed = params.seed.wrapping_add(class.code() as u64);
            solve_binary(xs.view(), &targets, params.c_penalty, params.tol, params.max_epochs, seed)
        })
        .collect();
    let (weights, biases) = solutions.into_iter().map(|s| (s.weights, s.bias)).unzip();
    Ok(SvmModel {
        class_codes: classes,
        weights,
        biases,
        c_penalty: params.c_penalty,
        scaler,
    })
}

/// Signed margins `w_c · scale(x) + b_c`; label is the argmax, lowest code on ties.
pub fn predict_svm(m: &SvmModel, x: ArrayView1<'_, f64>) -> Result<Prediction, ClassifierError> {
    if x.len() != m.dim() {
        return Err(ClassifierError::DimMismatch {
            expected: m.dim(),
            found: x.len(),
        });
    }
    let z = m.scaler.transform_row(x);
    let scores = m
        .weights
        .iter()
        .zip(&m.biases)
        .map(|(w, b)| z.dot(&ArrayView1::from(&w[..])) + b)
        .collect();
    Ok(Prediction::from_scores(&m.class_codes, scores))
}
