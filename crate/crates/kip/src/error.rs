use thiserror::Error;

/// Errors reported by the library. Contract violations (bad lengths, empty
/// inputs where the caller guarantees otherwise) panic instead; everything a
/// caller might reasonably hit at runtime goes through this enum.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid IPv6 address {0:?}")]
    AddressParse(String),

    #[error("invalid prefix {0:?}: expected <address>/<length 0..=128>")]
    PrefixParse(String),

    #[error("invalid timestamp {0:?}: expected epoch seconds or ISO-8601 UTC")]
    TimestampParse(String),

    #[error("timestamp {timestamp} outside grid window [{start}, {end})")]
    OutOfWindow { timestamp: i64, start: i64, end: i64 },

    #[error("invalid time grid: {0}")]
    BadGrid(String),

    #[error("window of {intervals} interval(s) has no fenceposts; {operation} needs at least 2 intervals")]
    UnsupportedWindow { intervals: u32, operation: &'static str },

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("malformed aggregate set file, line {line}: {reason}")]
    SetFormat { line: usize, reason: String },

    #[error("duplicate aggregate prefix {0}")]
    DuplicatePrefix(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
