use thiserror::Error;

/// Failures of a harness run.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("initial data: {0}")]
    InitialData(String),
    #[error(transparent)]
    Core(#[from] hartree_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Stable machine-readable category for error.json.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::InitialData(_) => "initial_data",
            Self::Core(_) => "numerics",
            Self::Io(_) => "io",
            Self::Json(_) => "json",
        }
    }
}

pub type Result<V> = std::result::Result<V, HarnessError>;
