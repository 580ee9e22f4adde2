use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("column {0} has a single distinct value and cannot be standardized")]
    ConstantColumn(usize),

    #[error("category count must be at least 2, got {0}")]
    BadCategoryCount(usize),

    #[error("invalid permuted-block configuration: {0}")]
    BadBlockConfig(String),

    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("subject {0} has no covariate categories; discretize before using the PS method")]
    MissingCategories(String),

    #[error("no subjects have been allocated yet")]
    EmptyTrial,

    #[error("group {0} is empty")]
    EmptyGroup(u8),

    #[error("the BKW method requires an even target size, got {0}")]
    OddTargetN(usize),

    #[error("gamma {gamma} lies outside the configured range [{lo}, {hi}]")]
    GammaOutOfRange { gamma: f64, lo: f64, hi: f64 },

    #[error("trial is full ({0} subjects allocated)")]
    TrialFull(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("invalid covariate matrix: {0}")]
    InvalidMatrix(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("non-numeric cell at line {line}, column {column}: {value:?}")]
    NonNumericCell { line: usize, column: usize, value: String },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("invalid simulation plan: {0}")]
    InvalidPlan(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Stable machine-readable tag, used in service payloads and record files.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ConstantColumn(_) => "constant_column",
            Error::BadCategoryCount(_) => "bad_category_count",
            Error::BadBlockConfig(_) => "bad_block_config",
            Error::NotPsd(_) => "not_psd",
            Error::NotSymmetric(_) => "not_symmetric",
            Error::MissingCategories(_) => "missing_categories",
            Error::EmptyTrial => "empty_trial",
            Error::EmptyGroup(_) => "empty_group",
            Error::OddTargetN(_) => "odd_target_n",
            Error::GammaOutOfRange { .. } => "gamma_out_of_range",
            Error::TrialFull(_) => "trial_full",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::InvalidMatrix(_) => "invalid_matrix",
            Error::Parse { .. } => "parse_error",
            Error::NonNumericCell { .. } => "non_numeric_cell",
            Error::EmptyDataset => "empty_dataset",
            Error::InvalidPlan(_) => "invalid_plan",
            Error::Io(_) => "io_error",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
