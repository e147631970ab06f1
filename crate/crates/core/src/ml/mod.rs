//! Supervised learners used by the prediction studies: k-nearest neighbours,
//! an RBF support vector machine trained by SMO, and a small logistic
//! feed-forward network trained by full-batch gradient descent.
//!
//! Labels are small unsigned integer codes throughout; ties are always
//! resolved toward the lowest code so that predictions are deterministic.

mod dataset;
mod knn;
mod mlp;
mod persist;
mod svm;

pub use dataset::{agreement, one_hot, Agreement, Dataset, MinMaxScaler};
pub use knn::KnnModel;
pub use mlp::{gradient_check, MlpClassifier, MlpModel, MlpTrainConfig, TrainReport};
pub use persist::{load_model, save_model, SavedModel};
pub use svm::{median_pairwise_distance, Kernel, SvmConfig, SvmModel};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlError {
    #[error("dataset is empty")]
    Empty,
    #[error("row {row} has {found} features, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("row {row} feature {col} is not finite")]
    NotFinite { row: usize, col: usize },
    #[error("{features} feature rows but {labels} labels")]
    LabelCount { features: usize, labels: usize },
    #[error("split fraction must be in (0, 1), got {0}")]
    Fraction(f64),
    #[error("split leaves the {0} side empty")]
    EmptySide(&'static str),
    #[error("k = {k} must be in 1..={n}")]
    BadK { k: usize, n: usize },
    #[error("training needs at least two classes")]
    OneClass,
    #[error("SMO did not converge after {iterations} iterations (KKT gap {gap:.3e})")]
    NotConverged { iterations: usize, gap: f64 },
    #[error("training diverged at epoch {0} (loss is not finite)")]
    Diverged(usize),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model file: {0}")]
    Format(String),
}

/// Anything that maps a feature vector to a label code.
pub trait Classifier {
    fn predict(&self, x: &[f64]) -> u32;

    fn predict_all(&self, rows: &[Vec<f64>]) -> Vec<u32> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}
