use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum GbflError {
    #[error("I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV parse error in {path}, row {row}, column {column}: {message}")]
    CsvParse {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("class `{0}` has fewer than 2 samples and cannot be stratified")]
    UnstratifiableClass(String),

    #[error("training diverged (non-finite loss at epoch {epoch}); try a smaller learning rate")]
    Divergence { epoch: usize },

    #[error("model file error at {path}: {message}")]
    ModelFile { path: String, message: String },

    #[error("external model error: {0}")]
    ExternalModel(String),

    #[error("model returned a non-finite confidence")]
    NonFiniteConfidence,

    #[error("no clauses survived generation; try a larger delta or a finer grid (larger N)")]
    NoClauses,

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage} failed for seed {seed}: {message}")]
    Stage {
        stage: String,
        seed: u64,
        message: String,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GbflError>;

impl GbflError {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        GbflError::Io {
            path: path.into(),
            source,
        }
    }
}
