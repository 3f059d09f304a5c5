use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("threat spec error at feature {feature}: {message}")]
    ThreatSpec { feature: usize, message: String },

    #[error("threat model has {got} feature entries, dataset has {expected}")]
    ThreatArity { expected: usize, got: usize },

    #[error("invalid threat model: {0}")]
    InvalidThreat(String),

    #[error("feature index {index} out of range ({count} features)")]
    FeatureIndex { index: usize, count: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error(
        "categorical feature {feature} has {categories} categories, more than the cap of {cap}; \
         pre-encode it (e.g. one-hot or ordinal) before fitting"
    )]
    TooManyCategories { feature: usize, categories: usize, cap: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("labels must be binary: {0}")]
    NonBinaryLabels(String),

    #[error("missing value at row {row}, column {column:?}")]
    MissingValue { row: usize, column: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("sample has {got} features, model expects {expected}")]
    SampleArity { expected: usize, got: usize },

    #[error("class {class} has {members} members, fewer than the {folds} folds requested")]
    ClassTooSmall { class: u8, members: usize, folds: usize },

    #[error("unsupported model version {found} (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("malformed model document: {0}")]
    MalformedModel(String),

    #[error("openML dataset not found: {0}")]
    DatasetNotFound(String),

    #[error("network error fetching {url}: {message}; check connectivity or pre-populate the cache directory and retry")]
    Network { url: String, message: String },

    #[error("malformed openML payload: {0}")]
    MalformedPayload(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad user input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ThreatSpec { .. }
                | Error::ThreatArity { .. }
                | Error::InvalidThreat(_)
                | Error::FeatureIndex { .. }
                | Error::InvalidParam(_)
                | Error::TooManyCategories { .. }
                | Error::ClassTooSmall { .. }
                | Error::SampleArity { .. }
        )
    }
}
