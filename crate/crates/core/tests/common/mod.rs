//! Reference implementations used by the integration and acceptance tests.
//! They share no code with the library.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Per-class `(tp, tn, fp, fn)` from an explicit list of `(truth, predicted)` pairs.
pub fn brute_force_counts(counts: &[[u64; 3]; 3]) -> [(u64, u64, u64, u64); 3] {
    let mut pairs = Vec::new();
    for (t, row) in counts.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            for _ in 0..n {
                pairs.push((t, p));
            }
        }
    }
    let mut out = [(0, 0, 0, 0); 3];
    for (c, slot) in out.iter_mut().enumerate() {
        for &(t, p) in &pairs {
            match (t == c, p == c) {
                (true, true) => slot.0 += 1,
                (false, false) => slot.1 += 1,
                (false, true) => slot.2 += 1,
                (true, false) => slot.3 += 1,
            }
        }
    }
    out
}

/// `(accuracy, macro precision, macro recall, macro f1, per-class [p, r, f1])`.
pub struct ReferenceMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: [[f64; 3]; 3],
}

pub fn reference_metrics(counts: &[[u64; 3]; 3]) -> ReferenceMetrics {
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let total: u64 = counts.iter().flatten().sum();
    let correct: u64 = (0..3).map(|i| counts[i][i]).sum();
    let mut per_class = [[0.0; 3]; 3];
    for (c, (tp, _tn, fp, fn_)) in brute_force_counts(counts).into_iter().enumerate() {
        let p = div(tp as f64, (tp + fp) as f64);
        let r = div(tp as f64, (tp + fn_) as f64);
        per_class[c] = [p, r, div(2.0 * p * r, p + r)];
    }
    let mean = |k: usize| per_class.iter().map(|m| m[k]).sum::<f64>() / 3.0;
    ReferenceMetrics {
        accuracy: correct as f64 / total as f64,
        precision: mean(0),
        recall: mean(1),
        f1: mean(2),
        per_class,
    }
}

/// Exact solution of the bias-augmented soft-margin dual
/// `max Σα − ½ αᵀQα, 0 ≤ α ≤ C, Q_ij = y_i y_j (x_i·x_j + 1)`,
/// found by enumerating which multipliers sit at 0, at C or strictly inside.
/// Returns `(w, b)` with `w = Σ α_i y_i x_i` and `b = Σ α_i y_i`.
pub fn svm_qp_oracle(x: &[Vec<f64>], y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let n = x.len();
    let d = x[0].len();
    let z: Vec<Vec<f64>> = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| row.iter().map(|v| yi * v).chain([yi]).collect())
        .collect();
    let q = |i: usize, j: usize| z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum::<f64>();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let states = 3usize.pow(n as u32);
    for code in 0..states {
        // 0 = at zero, 1 = at C, 2 = free
        let state: Vec<usize> = (0..n).map(|i| (code / 3usize.pow(i as u32)) % 3).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        if free.len() > d + 1 {
            continue;
        }
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        if !free.is_empty() {
            let zf = DMatrix::from_fn(free.len(), d + 1, |r, k| z[free[r]][k]);
            if zf.clone().svd(false, false).rank(1e-10) < free.len() {
                continue;
            }
            let qff = DMatrix::from_fn(free.len(), free.len(), |r, s| q(free[r], free[s]));
            let rhs = DVector::from_fn(free.len(), |r, _| {
                1.0 - (0..n).filter(|&j| state[j] == 1).map(|j| q(free[r], j) * c).sum::<f64>()
            });
            let Some(sol) = qff.lu().solve(&rhs) else { continue };
            if sol.iter().any(|&a| a <= 0.0 || a >= c) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r];
            }
        }
        let w: Vec<f64> = (0..=d).map(|k| (0..n).map(|i| alpha[i] * z[i][k]).sum()).collect();
        let margin = |i: usize| z[i].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let kkt = (0..n).all(|i| match state[i] {
            0 => margin(i) >= 1.0 - 1e-9,
            1 => margin(i) <= 1.0 + 1e-9,
            _ => true,
        });
        if !kkt {
            continue;
        }
        let objective = alpha.iter().sum::<f64>() - 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        if best.as_ref().is_none_or(|(o, _)| objective > *o) {
            best = Some((objective, w));
        }
    }
    let (_, w) = best.expect("the dual always has a KKT point");
    (w[..d].to_vec(), w[d])
}

/// Population mean and variance by two plain passes.
pub fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut sum = 0.0;
    for &v in values {
        sum += v;
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for &v in values {
        ss += (v - mean) * (v - mean);
    }
    (mean, ss / n)
}

/// `ln N(x; μ, σ²)`
pub fn gaussian_log_density(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}
