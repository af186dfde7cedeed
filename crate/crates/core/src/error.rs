use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the toolkit.
///
/// Input errors (bad files, schema violations, undersized corpora) map to
/// exit code 2 in the CLI; internal invariant violations map to 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed record at line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("unknown speaker at line {line}: {speaker:?}")]
    UnknownSpeaker { line: usize, speaker: String },

    #[error("empty turns list at line {line}")]
    EmptyTurns { line: usize },

    #[error("duplicate session_id {session_id:?} at line {line}")]
    DuplicateSession { line: usize, session_id: String },

    #[error("invalid turn at line {line}: {message}")]
    InvalidTurn { line: usize, message: String },

    #[error("empty session after normalization: {0}")]
    EmptyAfterNormalization(String),

    #[error("session too short for turn-pair metrics: {0}")]
    SessionTooShort(String),

    #[error("undefined readability: text has no words")]
    UndefinedReadability,

    #[error("empty session: {0}")]
    EmptySession(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("corpus too small: {0}")]
    CorpusTooSmall(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),

    #[error("invalid rule set: {0}")]
    InvalidRules(String),

    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),

    #[error("version conflict: stored version is {current}, request was based on {requested}")]
    VersionConflict { current: u64, requested: u64 },

    #[error("unknown format {0:?}")]
    UnknownFormat(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error stems from an internal invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}
