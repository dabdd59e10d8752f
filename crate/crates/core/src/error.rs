use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DfmError {
    #[error("series `{0}` has zero variance")]
    ZeroVarianceSeries(String),
    #[error("series `{0}` has fewer than two observed values")]
    InsufficientData(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("panels have different frequencies")]
    FrequencyMismatch,
    #[error("duplicate series name `{0}`")]
    DuplicateSeriesName(String),
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("non-finite value in {0}")]
    NonFiniteValue(String),
    #[error("innovation covariance is singular or ill-conditioned at t={0}")]
    SingularInnovationCovariance(usize),
    #[error("panel is not standardized: {0}")]
    NotStandardized(String),
    #[error("log-likelihood is not finite at the starting values")]
    OptimizerDiverged,
    #[error("panel correlation matrix is degenerate")]
    DegenerateCovariance,
    #[error("standard error must be positive, got {0}")]
    NonPositiveStdError(f64),
    #[error("estimation did not converge")]
    NotConverged,
    #[error("every series was dropped during reduction")]
    AllSeriesDropped,
    #[error("operation requires a different model shape: {0}")]
    WrongShape(String),
    #[error("trend window {window} exceeds path length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("series is empty")]
    EmptySeries,
    #[error("percentile must lie strictly between 0 and 1, got {0}")]
    InvalidP(f64),
    #[error("unknown series `{0}`")]
    UnknownSeries(String),
    #[error("scenario override for `{series}` at {period} is inside the sample")]
    OverrideInSample { series: String, period: String },
    #[error("scenario override for `{series}` at {period} is beyond the forecast horizon")]
    OverrideBeyondHorizon { series: String, period: String },
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, DfmError>;
