use thiserror::Error;

use crate::estimators::ModelClass;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The homogeneous coordinate of a mapped point vanished.
    #[error("point maps near the plane at infinity (w = {w:e})")]
    NearInfinityPoint { w: f64 },

    #[error("projection product has rank {rank} < 3")]
    RankDeficient { rank: usize },

    #[error("{model} needs at least {needed} correspondences, got {got}")]
    TooFewPoints {
        model: ModelClass,
        needed: usize,
        got: usize,
    },

    #[error("degenerate configuration for {model}: {reason}")]
    DegenerateConfiguration { model: ModelClass, reason: String },

    #[error("no consensus: best inlier fraction {best_fraction:.3} < required {required:.3}")]
    NoConsensus { best_fraction: f64, required: f64 },

    #[error("degenerate pivot motion: {0}")]
    DegenerateMotion(String),

    #[error("quaternion average is ambiguous (top eigenvalues {0:e} and {1:e})")]
    AmbiguousAverage(f64, f64),

    #[error("bad packet magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("bad packet length {0}, expected 48")]
    BadLength(usize),

    #[error("packet quaternion norm {0} is not unit")]
    NonUnitQuaternion(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("workspace cannot hold the alignment object: {0}")]
    WorkspaceTooSmall(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
