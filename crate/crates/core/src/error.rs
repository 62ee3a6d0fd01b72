use thiserror::Error;

#[derive(Debug, Error)]
pub enum NoeError {
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl NoeError {
    pub fn input(path: impl Into<String>, message: impl Into<String>) -> Self {
        NoeError::Input {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            NoeError::Geometry(_) | NoeError::Input { .. } | NoeError::Io { .. } => 2,
            NoeError::Infeasible(_) => 3,
            NoeError::Solver(_) => 4,
        }
    }
}

pub type Result<T, E = NoeError> = std::result::Result<T, E>;
