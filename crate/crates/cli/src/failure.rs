use std::fmt;

use erythro_core::classifiers::ClassifierError;
use erythro_core::dataset::DatasetError;
use erythro_core::eval::EvalError;
use erythro_core::features::FeatureError;
use erythro_core::report::ReportError;

pub const EXIT_DATASET: i32 = 2;
pub const EXIT_MODEL: i32 = 3;
pub const EXIT_EVAL: i32 = 4;
pub const EXIT_MODEL_IO: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

/// An error message paired with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure::new(EXIT_USAGE, message)
    }

    pub fn eval(message: impl Into<String>) -> Self {
        Failure::new(EXIT_EVAL, message)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        Failure::new(EXIT_DATASET, format!("dataset error: {e}"))
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        let code = match e {
            FeatureError::Io { .. } | FeatureError::Format { .. } => EXIT_MODEL_IO,
            _ => EXIT_MODEL,
        };
        Failure::new(code, format!("feature error: {e}"))
    }
}

impl From<ClassifierError> for Failure {
    fn from(e: ClassifierError) -> Self {
        let code = match e {
            ClassifierError::Io { .. }
            | ClassifierError::Format { .. }
            | ClassifierError::VersionMismatch { .. }
            | ClassifierError::DimMismatch { .. } => EXIT_MODEL_IO,
            _ => EXIT_EVAL,
        };
        Failure::new(code, format!("classifier error: {e}"))
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure::eval(format!("evaluation error: {e}"))
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::eval(format!("report error: {e}"))
    }
}
