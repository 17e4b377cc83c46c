use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dataset::ClassLabel;

const K: usize = ClassLabel::COUNT;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; K]; K],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; K]; K]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a ClassLabel, &'a ClassLabel)>) -> Self {
        let mut cm = ConfusionMatrix::default();
        for (&truth, &pred) in pairs {
            cm.record(truth, pred);
        }
        cm
    }

    pub fn record(&mut self, truth: ClassLabel, predicted: ClassLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..K).map(|c| self.counts[c][c]).sum()
    }

    /// One-vs-rest `(tp, tn, fp, fn)` for `class`.
    pub fn one_vs_rest(&self, class: ClassLabel) -> (u64, u64, u64, u64) {
        let c = class.index();
        let tp = self.counts[c][c];
        let fp = (0..K).map(|r| self.counts[r][c]).sum::<u64>() - tp;
        let fn_ = self.counts[c].iter().sum::<u64>() - tp;
        let tn = self.total() - tp - fp - fn_;
        (tp, tn, fp, fn_)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    Precision,
    Recall,
    F1,
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricName::Precision => "precision",
            MetricName::Recall => "recall",
            MetricName::F1 => "f1",
        })
    }
}

/// A metric forced to 0 because its denominator was 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DegenerateFlag {
    pub class: ClassLabel,
    pub metric: MetricName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: ClassLabel,
    /// `(TP + TN) / total` of the one-vs-rest problem.
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Global accuracy plus macro-averaged precision, recall and F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub degenerate_flags: Vec<DegenerateFlag>,
}

fn ratio(num: f64, den: f64, class: ClassLabel, metric: MetricName, flags: &mut Vec<DegenerateFlag>) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        flags.push(DegenerateFlag { class, metric });
        0.0
    }
}

/// Applies accuracy/precision/recall/F1 per class one-vs-rest and macro-averages
/// the last three. Accuracy is `trace / total`.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricSet, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut flags = Vec::new();
    let per_class: Vec<ClassMetrics> = ClassLabel::ALL
        .iter()
        .map(|&class| {
            let (tp, tn, fp, fn_) = cm.one_vs_rest(class);
            let (tp, tn, fp, fn_) = (tp as f64, tn as f64, fp as f64, fn_ as f64);
            let precision = ratio(tp, tp + fp, class, MetricName::Precision, &mut flags);
            let recall = ratio(tp, tp + fn_, class, MetricName::Recall, &mut flags);
            let f1 = ratio(2.0 * precision * recall, precision + recall, class, MetricName::F1, &mut flags);
            ClassMetrics {
                class,
                accuracy: (tp + tn) / (tp + tn + fp + fn_),
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let macro_mean = |get: fn(&ClassMetrics) -> f64| per_class.iter().map(get).sum::<f64>() / K as f64;
    Ok(MetricSet {
        accuracy: cm.trace() as f64 / total as f64,
        precision: macro_mean(|m| m.precision),
        recall: macro_mean(|m| m.recall),
        f1: macro_mean(|m| m.f1),
        per_class: per_class.clone(),
        degenerate_flags: flags,
    })
}

impl MetricSet {
    /// Arithmetic mean of every metric; flags are the sorted union.
    ///
    /// Panics on an empty slice.
    pub fn mean(sets: &[MetricSet]) -> MetricSet {
        assert!(!sets.is_empty(), "cannot average zero metric sets");
        let n = sets.len() as f64;
        let avg = |get: &dyn Fn(&MetricSet) -> f64| sets.iter().map(get).sum::<f64>() / n;
        let per_class = (0..K)
            .map(|c| ClassMetrics {
                class: ClassLabel::ALL[c],
                accuracy: avg(&|s| s.per_class[c].accuracy),
                precision: avg(&|s| s.per_class[c].precision),
                recall: avg(&|s| s.per_class[c].recall),
                f1: avg(&|s| s.per_class[c].f1),
            })
            .collect();
        let mut flags: Vec<DegenerateFlag> = sets.iter().flat_map(|s| s.degenerate_flags.iter().copied()).collect();
        flags.sort();
        flags.dedup();
        MetricSet {
            accuracy: avg(&|s| s.accuracy),
            precision: avg(&|s| s.precision),
            recall: avg(&|s| s.recall),
            f1: avg(&|s| s.f1),
            per_class,
            degenerate_flags: flags,
        }
    }
}
