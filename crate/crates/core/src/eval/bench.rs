use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::classifiers::{self, ClassifierKind, SvmParams};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStat {
    pub samples: Vec<f64>,
    pub median: f64,
    pub mean: f64,
}

impl TimingStat {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        assert!(!samples.is_empty(), "no timing samples");
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        };
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        TimingStat { samples, median, mean }
    }
}

/// Wall-clock seconds for full-data training and for predicting 1000 samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub backbone: String,
    pub classifier: ClassifierKind,
    pub rows: usize,
    pub dim: usize,
    pub repetitions: usize,
    pub train_s: TimingStat,
    pub predict_per_1000_s: TimingStat,
}

/// Trains on all of `x` and predicts all of `x`, `repetitions` times.
pub fn benchmark(
    x: &FeatureMatrix,
    kind: ClassifierKind,
    repetitions: usize,
    params: &SvmParams,
) -> Result<TimingSummary, EvalError> {
    if repetitions == 0 {
        return Err(EvalError::NoRepetitions);
    }
    let mut train = Vec::with_capacity(repetitions);
    let mut predict = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let started = Instant::now();
        let model = classifiers::train(kind, x.values().view(), x.labels(), params)?;
        train.push(started.elapsed().as_secs_f64());

        let started = Instant::now();
        let predictions = model.predict_rows(x.values().view())?;
        let elapsed = started.elapsed().as_secs_f64();
        std::hint::black_box(predictions);
        predict.push(elapsed * 1000.0 / x.len() as f64);
    }
    Ok(TimingSummary {
        backbone: x.backbone().to_string(),
        classifier: kind,
        rows: x.len(),
        dim: x.dim(),
        repetitions,
        train_s: TimingStat::from_samples(train),
        predict_per_1000_s: TimingStat::from_samples(predict),
    })
}
