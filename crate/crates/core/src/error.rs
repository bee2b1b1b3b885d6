use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("categorical value {value} out of range for feature `{feature}` (arity {arity})")]
    CategoricalOutOfRange {
        feature: String,
        value: f64,
        arity: usize,
    },

    #[error("non-finite value for numeric feature `{feature}`")]
    NonFinite { feature: String },

    #[error("unknown class index {class} (schema has {n_classes} classes)")]
    UnknownClass { class: usize, n_classes: usize },

    #[error("unknown class label `{0}`")]
    UnknownLabel(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("confusion matrix index out of range: ({row}, {col}) for {n} classes")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("metric undefined on an empty confusion matrix")]
    EmptyMatrix,

    #[error("invalid concept {concept} for generator `{family}`")]
    InvalidConcept { family: &'static str, concept: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("stream source exhausted")]
    Exhausted,

    #[error("learner is frozen and rejects incremental updates")]
    FrozenLearner,

    #[error("learner `{0}` only supports batch training")]
    BatchOnly(String),

    #[error("learner must be frozen before pretrained evaluation")]
    NotFrozen,

    #[error("learner has not been trained")]
    Untrained,

    #[error("instance {seq} has no label")]
    Unlabeled { seq: u64 },

    #[error("empty stream")]
    EmptyStream,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("detector input {0} outside the accepted domain")]
    DetectorInput(f64),

    #[error("buffer too small: {len} instances for {folds} folds (need at least {needed})")]
    BufferTooSmall {
        len: usize,
        folds: usize,
        needed: usize,
    },

    #[error("evaluation budget exhausted before any configuration was evaluated")]
    BudgetExhausted,

    #[error("stream ended before one full holdout cycle ({needed} samples)")]
    StreamTooShort { needed: usize },

    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("column `{column}` mixes numeric and missing values (row {row})")]
    MixedParse { column: String, row: usize },

    #[error("row {row} has {actual} fields, header has {expected}")]
    RowArity {
        row: usize,
        expected: usize,
        actual: usize,
    },

    #[error("label column `{0}` not found")]
    MissingLabelColumn(String),

    #[error("topic `{0}` does not exist")]
    UnknownTopic(String),

    #[error("topic `{name}` is full (capacity {capacity})")]
    TopicOverflow { name: String, capacity: usize },

    #[error("topic `{0}` is closed")]
    TopicClosed(String),

    #[error("trace is empty")]
    EmptyTrace,

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_row(self, row: usize) -> Self {
        Error::Row {
            row,
            source: Box::new(self),
        }
    }
}
