use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// A location in an input file, used to point at offending rows.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SourceLine {
    pub file: PathBuf,
    pub line: u64,
}

impl fmt::Display for SourceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file.display(), self.line)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed row at {at}: {message}")]
    MalformedRow { at: SourceLine, message: String },

    #[error("duplicate record {key} at {first} and {second}")]
    DuplicateRecord {
        key: String,
        first: SourceLine,
        second: SourceLine,
    },

    #[error("unknown zone '{zone}' at {at}")]
    UnknownZone { zone: String, at: SourceLine },

    #[error("timezone-ambiguous timestamp '{value}' at {at} (an explicit UTC offset is required)")]
    AmbiguousTimestamp { value: String, at: SourceLine },

    #[error("data error: {0}")]
    Data(String),

    #[error("rank-deficient design; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } | Error::Config(_) => "config",
            Error::MalformedRow { .. }
            | Error::DuplicateRecord { .. }
            | Error::UnknownZone { .. }
            | Error::AmbiguousTimestamp { .. }
            | Error::Data(_) => "data",
            Error::RankDeficient { .. } | Error::Numerical(_) => "numerical",
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" => 2,
            "data" => 3,
            _ => 4,
        }
    }
}
