use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    UnparseableCell { row: usize, column: String, value: String },

    #[error("column `{0}` is not present in the header")]
    UnknownColumn(String),

    #[error("column `{0}` is assigned more than one role")]
    DuplicateRole(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("variables X, M and Y must be fully observed for a complete-data fit")]
    MaskedCells,

    #[error("at least {needed} rows are required, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("singular design: {0}")]
    SingularDesign(&'static str),

    #[error("negative radicand {0} in delta-method standard error")]
    NegativeOperand(f64),

    #[error("cannot pool an empty list of estimates")]
    EmptyInput,

    #[error("column `{0}` has fewer than two observed values")]
    AllMissingColumn(String),

    #[error("row {0} has no observed role-bound values")]
    RowAllMissing(usize),

    #[error("matrix is not positive definite after ridge repair")]
    NonPositiveDefinite,

    #[error("data augmentation chain diverged: {0}")]
    ChainDivergence(&'static str),

    #[error("at least 2 bootstrap replicates are required, got {0}")]
    TooFewReplicates(usize),

    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("all {0} bootstrap replicates failed")]
    AllReplicatesFailed(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("relative deviance undefined: reference value is zero")]
    UndefinedDeviance,
}
