//! Error type shared across the crate.
//!
//! Failures are grouped into three classes so that callers (most importantly
//! the CLI) can map them to distinct exit codes: configuration problems,
//! data problems, and numerical problems. Plain IO failures keep their own
//! variant so the source error is preserved.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration (bad ranges, unknown keys,
    /// contradictory options).
    #[error("config error: {0}")]
    Config(String),

    /// Invalid input data (malformed CSV, non-binary labels, empty strata,
    /// degenerate inputs).
    #[error("data error: {0}")]
    Data(String),

    /// Numerical failure (diverging or non-converging optimization,
    /// degenerate probabilities).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Underlying IO failure while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Same failure class with `context` prefixed to the message, so a
    /// failure deep in a run still names where it happened.
    pub fn with_context(self, context: &str) -> Self {
        match self {
            Error::Config(m) => Error::Config(format!("{context}: {m}")),
            Error::Data(m) => Error::Data(format!("{context}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("{context}: {m}")),
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), format!("{context}: {e}"))),
        }
    }

    /// Process exit code for this failure class.
    ///
    /// 0 is success by convention; clap already uses 2 for usage errors,
    /// which are configuration problems, so `Config` shares that code.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) => 3,
            Error::Numeric(_) => 4,
            Error::Io(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_and_nonzero() {
        let codes = [
            Error::config("x").exit_code(),
            Error::data("x").exit_code(),
            Error::numeric("x").exit_code(),
            Error::Io(std::io::Error::other("x")).exit_code(),
        ];
        for (i, a) in codes.iter().enumerate() {
            assert_ne!(*a, 0);
            for b in codes.iter().skip(i + 1) {
                assert_ne!(*a, *b);
            }
        }
    }

    #[test]
    fn with_context_prefixes_and_keeps_the_class() {
        let wrapped = Error::numeric("diverged").with_context("split 3, mitigation");
        assert_eq!(wrapped.exit_code(), Error::numeric("x").exit_code());
        assert_eq!(
            wrapped.to_string(),
            "numeric error: split 3, mitigation: diverged"
        );
        let io = Error::Io(std::io::Error::other("disk full")).with_context("writing report");
        assert_eq!(io.exit_code(), 5);
        assert!(io.to_string().contains("writing report: disk full"), "{io}");
    }

    #[test]
    fn messages_carry_the_class_prefix() {
        assert_eq!(
            Error::config("bad value").to_string(),
            "config error: bad value"
        );
        assert_eq!(Error::data("bad row").to_string(), "data error: bad row");
        assert_eq!(
            Error::numeric("diverged").to_string(),
            "numeric error: diverged"
        );
    }
}
