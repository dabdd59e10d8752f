use std::io;
use std::path::PathBuf;

use dfm_core::DfmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: u64, column: usize, message: String },
    #[error("period `{0}` appears more than once")]
    NonMonotonicPeriods(String),
    #[error("unknown series `{0}`")]
    UnknownSeries(String),
    #[error("data: {0}")]
    Data(String),
    #[error("{stage}: {source}")]
    Model {
        stage: &'static str,
        #[source]
        source: DfmError,
    },
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Process exit status for configuration problems.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

impl CliError {
    pub fn model(stage: &'static str) -> impl FnOnce(DfmError) -> CliError {
        move |source| CliError::Model { stage, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. }
            | CliError::Parse { .. }
            | CliError::NonMonotonicPeriods(_)
            | CliError::UnknownSeries(_)
            | CliError::Data(_) => EXIT_DATA,
            CliError::Model { source, .. } => match source {
                DfmError::InvalidSpec(_)
                | DfmError::InvalidArgument(_)
                | DfmError::InvalidP(_)
                | DfmError::InvalidHorizon
                | DfmError::WindowTooLong { .. }
                | DfmError::WrongShape(_) => EXIT_CONFIG,
                DfmError::ZeroVarianceSeries(_)
                | DfmError::InsufficientData(_)
                | DfmError::DimensionMismatch(_)
                | DfmError::FrequencyMismatch
                | DfmError::DuplicateSeriesName(_)
                | DfmError::InvalidPanel(_)
                | DfmError::NonFiniteValue(_)
                | DfmError::NotStandardized(_)
                | DfmError::EmptySeries
                | DfmError::UnknownSeries(_)
                | DfmError::OverrideInSample { .. }
                | DfmError::OverrideBeyondHorizon { .. } => EXIT_DATA,
                DfmError::SingularInnovationCovariance(_)
                | DfmError::OptimizerDiverged
                | DfmError::DegenerateCovariance
                | DfmError::NonPositiveStdError(_)
                | DfmError::NotConverged
                | DfmError::AllSeriesDropped => EXIT_NUMERICAL,
            },
        }
    }
}
