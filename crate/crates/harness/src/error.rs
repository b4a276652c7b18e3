use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("{module}/{stage} failed: {source}")]
    Computation {
        module: &'static str,
        stage: String,
        #[source]
        source: spectral_dga_core::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report serialization failed: {0}")]
    Report(String),
}

impl HarnessError {
    pub fn computation(module: &'static str, stage: impl Into<String>, source: spectral_dga_core::Error) -> Self {
        Self::Computation {
            module,
            stage: stage.into(),
            source,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for validation, 3 for everything raised after
    /// validation succeeded.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
