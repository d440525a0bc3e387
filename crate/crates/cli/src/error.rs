use tri_ident_core::Error;

/// Exit code for a completed run whose verdict passes.
pub const EXIT_PASS: i32 = 0;
/// Exit code for a completed run whose verdict fails.
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_NUMERICAL,
            CliError::Core(e) => match e {
                Error::InvalidSpec(_)
                | Error::InvalidParameter(_)
                | Error::DimensionMismatch { .. }
                | Error::UnsupportedDimension(_)
                | Error::DegenerateGrid(_)
                | Error::GridTooLarge { .. }
                | Error::LevelOutOfRange(_)
                | Error::NotPositiveDefinite
                | Error::NotNormalized(_)
                | Error::SizeCapExceeded { .. } => EXIT_USAGE,
                Error::AssumptionFailure(_) => EXIT_FAIL,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}
