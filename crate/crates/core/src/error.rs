use std::fmt;
use std::io;
use std::path::PathBuf;

/// Every failure the toolkit can report.
///
/// The `Display` form is a single line so command-line tools can print it
/// verbatim as a machine-parsable error.
#[derive(Debug)]
pub enum Error {
    Io { path: PathBuf, source: io::Error },
    /// Malformed file contents (bad header, truncated data, bad text line).
    Format(String),
    /// A well-formed file whose encoding we do not handle.
    UnsupportedFormat(String),
    TooShort { needed: usize, got: usize },
    Dimension(String),
    Index(String),
    /// Batch-norm inference requested before any running statistics exist.
    UninitializedStats(String),
    /// Non-finite gradient, tagged with the parameter it was found in.
    NonFiniteGradient { param: String },
    NonFiniteLoss { epoch: usize, batch: usize, last_checkpoint: Option<PathBuf> },
    InsufficientData(String),
    Degenerate(String),
    IterationLimit(String),
    RankDeficient(String),
    Config(String),
    MissingArtifact(PathBuf),
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Short stable identifier used as the first token of CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
            Error::UnsupportedFormat(_) => "unsupported-format",
            Error::TooShort { .. } => "too-short",
            Error::Dimension(_) => "dimension",
            Error::Index(_) => "index",
            Error::UninitializedStats(_) => "uninitialized-stats",
            Error::NonFiniteGradient { .. } => "numerical",
            Error::NonFiniteLoss { .. } => "non-finite-loss",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Degenerate(_) => "degenerate",
            Error::IterationLimit(_) => "iteration-limit",
            Error::RankDeficient(_) => "rank-deficient",
            Error::Config(_) => "config",
            Error::MissingArtifact(_) => "missing-artifact",
            Error::InvalidArgument(_) => "invalid-argument",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.kind())?;
        match self {
            Error::Io { path, source } => write!(f, "{}: {}", path.display(), source),
            Error::Format(m)
            | Error::UnsupportedFormat(m)
            | Error::Dimension(m)
            | Error::Index(m)
            | Error::UninitializedStats(m)
            | Error::InsufficientData(m)
            | Error::Degenerate(m)
            | Error::IterationLimit(m)
            | Error::RankDeficient(m)
            | Error::Config(m)
            | Error::InvalidArgument(m) => f.write_str(m),
            Error::TooShort { needed, got } => {
                write!(f, "signal has {got} samples, at least {needed} required")
            }
            Error::NonFiniteGradient { param } => {
                write!(f, "non-finite gradient in parameter {param}")
            }
            Error::NonFiniteLoss { epoch, batch, last_checkpoint } => {
                write!(f, "non-finite loss at epoch {epoch} batch {batch}")?;
                match last_checkpoint {
                    Some(p) => write!(f, "; last good checkpoint {}", p.display()),
                    None => f.write_str("; no checkpoint written yet"),
                }
            }
            Error::MissingArtifact(p) => write!(f, "missing upstream artifact {}", p.display()),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
