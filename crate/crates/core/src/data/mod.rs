//! Datasets, preprocessing and the classifier recourse acts on.
//!
//! Continuous features are min-max scaled into `[0, 1]` and categorical ones
//! one-hot encoded. The favorable set `D₁` and unfavorable set `D₀` come from
//! the classifier's predictions, not from the labels.

mod classifier;
mod dataset;
mod schema;

use thiserror::Error;

pub use classifier::{accuracy, Classifier, LogisticRegression, Mlp, MlpCheckpoint, TrainConfig};
pub use dataset::{
    gen_synthetic, load_csv, read_csv, synthetic_label, ColumnEncoding, Dataset, DecodedFeature, Encoding,
    FeatureValue, SYNTHETIC_BOUNDS, TRAIN_FRACTION,
};
pub use schema::{DatasetSchema, FeatureKind, FeatureSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unseen category `{value}` in column `{column}`")]
    UnseenCategory { column: String, value: String },
    #[error("non-numeric value `{value}` in column `{column}`, data row {row}")]
    NonNumeric { column: String, row: usize, value: String },
    #[error("column `{0}` is constant")]
    ConstantColumn(String),
    #[error("need at least two rows, got {0}")]
    TooFewRows(usize),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("schema: {0}")]
    Schema(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row indices split by the classifier's decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

impl Partition {
    pub fn of(data: &Dataset, clf: &dyn Classifier, indices: &[usize]) -> Self {
        let (positive, negative) = indices
            .iter()
            .partition(|&&i| clf.predict(data.row(i).as_vector()));
        Self { positive, negative }
    }
}
