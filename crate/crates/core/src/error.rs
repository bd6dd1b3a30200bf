use thiserror::Error;

/// Errors raised while loading data, fitting models or running studies.
#[derive(Debug, Error)]
pub enum CaceError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("column `{column}` row {row}: value `{value}` is not 0 or 1")]
    NonBinary {
        column: String,
        row: usize,
        value: String,
    },

    #[error("column `{column}` row {row}: `{value}` is not numeric")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("column `{column}` row {row}: missing value")]
    MissingValue { column: String, row: usize },

    #[error("column `{column}` row {row}: non-finite value")]
    NonFinite { column: String, row: usize },

    #[error("{0}")]
    DegenerateArm(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("rank-deficient design: column `{column}` is collinear with earlier columns")]
    RankDeficient { column: String },

    #[error("design has {rows} rows but {cols} columns")]
    Underdetermined { rows: usize, cols: usize },

    #[error("leverage of unit {unit} is 1; HC2/HC3 weights are undefined")]
    DegenerateLeverage { unit: usize },

    #[error("reg requires covariates (K >= 1)")]
    NoCovariates,

    #[error("probability {0} outside (0, 1)")]
    InvalidProbability(f64),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("complier calibration failed after {0} population draws")]
    CalibrationFailed(usize),

    #[error("invalid population: {0}")]
    InvalidPopulation(String),

    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CaceError>;

impl CaceError {
    /// True for errors that come from collinear or otherwise unusable designs.
    pub fn is_rank_failure(&self) -> bool {
        matches!(
            self,
            CaceError::RankDeficient { .. }
                | CaceError::Underdetermined { .. }
                | CaceError::DegenerateLeverage { .. }
        )
    }
}
