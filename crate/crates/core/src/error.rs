use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: missing or invalid field `{field}`")]
    Schema { line: usize, field: &'static str },
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("undefined measure: {0}")]
    Undefined(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
