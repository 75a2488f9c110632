use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("empty mask: {0}")]
    EmptyMask(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: bad NIfTI-1 magic {found:?}", path.display())]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("{}: unsupported NIfTI datatype code {code}", path.display())]
    UnsupportedDatatype { path: PathBuf, code: i16 },

    #[error("{}: truncated payload, expected {expected} bytes, found {found}", path.display())]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{}: malformed NIfTI header: {reason}", path.display())]
    BadHeader { path: PathBuf, reason: String },

    #[error("malformed dataset descriptor: {0}")]
    Descriptor(String),

    #[error("dataset validation failed:\n{0}")]
    DatasetValidation(ValidationReport),

    #[error("missing fingerprint: {0}")]
    MissingFingerprint(String),

    #[error("invalid phantom spec: {0}")]
    Spec(String),

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that originate in the filesystem or in file decoding,
    /// as opposed to domain or validation failures.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::BadMagic { .. }
                | Error::UnsupportedDatatype { .. }
                | Error::Truncated { .. }
                | Error::BadHeader { .. }
                | Error::Csv { .. }
        )
    }
}

/// One problem found while validating a case of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseProblem {
    pub case_id: String,
    pub message: String,
}

/// Per-case problems collected by dataset loading.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub problems: Vec<CaseProblem>,
}

impl ValidationReport {
    pub fn push(&mut self, case_id: impl Into<String>, message: impl Into<String>) {
        self.problems.push(CaseProblem {
            case_id: case_id.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn mentions(&self, case_id: &str) -> bool {
        self.problems.iter().any(|p| p.case_id == case_id)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.problems.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  case {}: {}", p.case_id, p.message)?;
        }
        Ok(())
    }
}
