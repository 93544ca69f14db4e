//! Error type shared by every module.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by tensors, layers, graphs, loaders, and the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Tensor or layer received incompatible shapes.
    Shape(String),
    /// An API precondition was violated (wrong mode, missing cache, bad target).
    Contract(String),
    /// Invalid configuration (class count, unknown layer, hyperparameters).
    Config(String),
    /// Input data is semantically invalid (label out of range, empty image).
    Data(String),
    /// A file could not be parsed; the message names the offending row/field.
    Parse(String),
    /// Underlying I/O failure.
    Io(String),
    /// Weight file does not start with the RTCW magic.
    BadMagic { found: [u8; 4] },
    /// Weight file declares a format version this build does not understand.
    UnsupportedVersion { found: u16 },
    /// Weight file checksum does not match its payload.
    ChecksumMismatch { stored: u32, computed: u32 },
    /// Weight file ended before the declared content.
    Truncated { context: &'static str },
}

impl Error {
    /// Process exit code category: 3 for I/O and parse failures, 4 for
    /// contract and configuration violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Shape(_) | Error::Contract(_) | Error::Config(_) => 4,
            Error::Data(_)
            | Error::Parse(_)
            | Error::Io(_)
            | Error::BadMagic { .. }
            | Error::UnsupportedVersion { .. }
            | Error::ChecksumMismatch { .. }
            | Error::Truncated { .. } => 3,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::Contract(m) => write!(f, "contract error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Data(m) => write!(f, "data error: {m}"),
            Error::Parse(m) => write!(f, "parse error: {m}"),
            Error::Io(m) => write!(f, "io error: {m}"),
            Error::BadMagic { found } => {
                write!(f, "weight file error: bad magic {found:?}, expected \"RTCW\"")
            }
            Error::UnsupportedVersion { found } => {
                write!(f, "weight file error: unsupported format version {found}")
            }
            Error::ChecksumMismatch { stored, computed } => write!(
                f,
                "weight file error: CRC32 mismatch (stored {stored:#010x}, computed {computed:#010x})"
            ),
            Error::Truncated { context } => {
                write!(f, "weight file error: truncated while reading {context}")
            }
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
