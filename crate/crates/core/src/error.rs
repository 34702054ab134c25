use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the optimization core.
///
/// The variants line up with the CLI exit codes: `Usage` and `Config` are
/// caller mistakes, `Data` is malformed input, `Numeric` is a non-finite
/// value produced during a computation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn dimension(expected: usize, got: usize) -> Self {
        Error::Usage(alloc::format!(
            "dimension mismatch: expected {expected}, got {got}"
        ))
    }
}
