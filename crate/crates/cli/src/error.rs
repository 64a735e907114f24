use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

impl From<segdetect::Error> for CliError {
    fn from(e: segdetect::Error) -> Self {
        use segdetect::Error as E;
        match e {
            E::InvalidInput(_) => CliError::Input(e.to_string()),
            E::Config(_) | E::Contract(_) | E::StateSpaceTooLarge { .. } => {
                CliError::Config(e.to_string())
            }
            E::DegenerateSegment { .. } => CliError::Internal(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
