use std::path::PathBuf;

/// Errors raised anywhere in the regimen-learning pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A visible state, parameter array or code did not match the expected shape.
    #[error("schema error: {0}")]
    Schema(String),

    /// Input records were well-formed text but violated a data contract.
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// A structured input could not be parsed.
    #[error("parse error in {source_name}{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        source_name: String,
        line: Option<u64>,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A pipeline stage ran before the stage that produces its input.
    #[error("stage `{stage}` needs `{path}`; run stage `{required}` first")]
    MissingArtifact {
        stage: String,
        required: String,
        path: PathBuf,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(source_name: &str, line: Option<u64>, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(source_name: &str, err: serde_json::Error) -> Self {
        let line = if err.line() > 0 { Some(err.line() as u64) } else { None };
        Error::parse(source_name, line, err.to_string())
    }
}
