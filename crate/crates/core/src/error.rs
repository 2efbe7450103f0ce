use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quaternion norm {norm} is too far from 1")]
    NonUnitQuaternion { norm: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("pixel ({u}, {v}) outside a {width}x{height} image")]
    PixelOutOfBounds {
        u: f64,
        v: f64,
        width: u32,
        height: u32,
    },

    #[error("image arrays are not congruent: expected {expected} pixels, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("no candidate viewpoints to select from")]
    NoCandidates,

    #[error("requested {requested} candidates but the discrete set holds {available}")]
    NotEnoughCandidates { requested: usize, available: usize },

    #[error("predefined sequence exhausted after {len} viewpoints")]
    SequenceExhausted { len: usize },

    #[error("scene has no objects of interest to score")]
    NoObjectsOfInterest,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration: {0}")]
    Config(String),

    #[error("episode (scene {scene}, rotation {rotation}, planner {planner}): {source}")]
    Episode {
        scene: usize,
        rotation: usize,
        planner: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
