use thiserror::Error;

/// Errors produced by dataset ingestion, estimation, and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("non-numeric value `{value}` at row {row}, column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("treatment value at row {row} is not 0 or 1")]
    InvalidTreatment { row: usize },
    #[error("no usable rows after dropping missing values")]
    EmptyDataset,
    #[error("fuzzy design requires a treatment column")]
    FuzzyWithoutTreatment,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("singular design matrix: {0}")]
    SingularDesign(String),
    #[error("sharp design has treatment crossovers; use a fuzzy design")]
    SharpInconsistent,
    #[error("first-stage discontinuity is numerically zero; fuzzy estimate undefined")]
    WeakOrNoFirstStage,
    #[error("degenerate density: all mass falls in a single bin")]
    DegenerateDensity,
    #[error("p-value {0} outside [0, 1]")]
    InvalidP(f64),
    #[error("insufficient window: {0}")]
    InsufficientWindow(String),
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code, used in reports and CLI error documents.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "MISSING_COLUMN",
            Error::NonNumeric { .. } => "NON_NUMERIC",
            Error::InvalidTreatment { .. } => "INVALID_TREATMENT",
            Error::EmptyDataset => "EMPTY_DATASET",
            Error::FuzzyWithoutTreatment => "FUZZY_WITHOUT_TREATMENT",
            Error::InsufficientData(_) => "INSUFFICIENT_DATA",
            Error::SingularDesign(_) => "SINGULAR_DESIGN",
            Error::SharpInconsistent => "SHARP_INCONSISTENT",
            Error::WeakOrNoFirstStage => "WEAK_OR_NO_FIRST_STAGE",
            Error::DegenerateDensity => "DEGENERATE_DENSITY",
            Error::InvalidP(_) => "INVALID_P",
            Error::InsufficientWindow(_) => "INSUFFICIENT_WINDOW",
            Error::InvalidSpec(_) => "INVALID_SPEC",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => "DATA_NOT_FOUND",
            Error::Io(_) => "IO",
            Error::Csv(_) => "CSV",
        }
    }

    /// True for errors caused by an invalid configuration rather than the data.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidConfig(_) | Error::InvalidSpec(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
