use thiserror::Error;

/// Errors carry the process exit code they map to.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Fit(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<lsn_core::Error> for CliError {
    fn from(e: lsn_core::Error) -> Self {
        use lsn_core::Error as E;
        match e {
            E::Domain(_) | E::InvalidParameter { .. } | E::NotPositiveDefinite | E::Geometry(_) | E::Range { .. } => {
                CliError::Input(e.to_string())
            }
            E::DegenerateModel(_) | E::DegenerateFit { .. } | E::FitFailure(_) | E::Metric(_) => {
                CliError::Fit(e.to_string())
            }
        }
    }
}
