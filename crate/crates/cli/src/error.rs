use thiserror::Error;

/// Failures mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure in {stage}: {source}")]
    Numeric {
        stage: String,
        source: heatball_core::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn numeric(stage: impl Into<String>) -> impl FnOnce(heatball_core::Error) -> Self {
        let stage = stage.into();
        move |source| Self::Numeric { stage, source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric { .. } => 3,
            Self::Io(_) => 3,
        }
    }
}
