use std::io;

use thiserror::Error;

use crate::onomasticon::Gender;

/// Errors raised by the library. Validation problems found by
/// [`crate::assumptions::validate`] are reported as findings, not errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty onomasticon")]
    EmptyOnomasticon,
    #[error("duplicate rendition ({generic}, {gender}, {rendition})")]
    DuplicateRendition {
        generic: String,
        gender: Gender,
        rendition: String,
    },
    #[error("count must be at least 1 for ({generic}, {gender}, {rendition}), got {count}")]
    InvalidCount {
        generic: String,
        gender: Gender,
        rendition: String,
        count: i64,
    },
    #[error("unknown gender token {0:?}")]
    UnknownGender(String),
    #[error("no entry for generic name ({generic}, {gender})")]
    MissingGeneric { generic: String, gender: Gender },
    #[error("rendition {rendition:?} is not attested under ({generic}, {gender})")]
    MissingRendition {
        generic: String,
        gender: Gender,
        rendition: String,
    },
    #[error("rendition {rendition:?} already present under ({generic}, {gender})")]
    RenditionExists {
        generic: String,
        gender: Gender,
        rendition: String,
    },
    #[error(
        "rendition {rendition:?} ({gender}) is ambiguous across generic names: {candidates:?}"
    )]
    AmbiguousRendition {
        rendition: String,
        gender: Gender,
        candidates: Vec<String>,
    },
    #[error("rendition {rendition:?} appears in more than one tier")]
    OverlappingTiers { rendition: String },
    #[error("empty {0} stratum")]
    EmptyStratum(Gender),
    #[error("invalid cluster: {0}")]
    InvalidCluster(String),
    #[error("invalid assumptions: {0}")]
    InvalidAssumptions(String),
    #[error("invalid alternative: {0}")]
    InvalidAlternative(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
