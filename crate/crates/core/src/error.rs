use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoidError {
    /// Invalid code, field, or channel parameters.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// A value lies outside its admissible range.
    #[error("range error: {0}")]
    Range(String),
    /// Malformed or inconsistent input data.
    #[error("input error: {0}")]
    Input(String),
    /// A bit string does not have the expected framing.
    #[error("framing error: {0}")]
    Framing(String),
    /// A formula was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The source stream ended before a value could be emitted.
    #[error("source underrun after {consumed} symbols")]
    Underrun { consumed: usize },
    /// An exhaustive computation was asked for over too large a space.
    #[error("refused: {0}")]
    Refused(String),
    /// Inconsistent experiment configuration.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, MoidError>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::MoidError::$kind(format!($($arg)*)))
    };
}
pub(crate) use bail;
