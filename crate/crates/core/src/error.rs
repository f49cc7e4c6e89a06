use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("degenerate line segment: endpoints {0:.3e} px apart")]
    DegenerateSegment(f64),

    #[error("direction undefined for a zero vector")]
    ZeroDirection,

    #[error("rotation angle too close to 180 degrees for the Cayley chart")]
    CayleySingular,

    #[error("invalid scenario configuration: {0}")]
    InvalidConfig(String),

    #[error("could not place a visible landmark after {0} attempts")]
    SamplingExhausted(usize),

    #[error("not enough features: {0}")]
    NotEnoughFeatures(String),

    #[error("RANSAC found no consensus set of at least {required} {kind} (best had {best})")]
    NoConsensus {
        kind: &'static str,
        required: usize,
        best: usize,
    },

    #[error("Levenberg-Marquardt did not converge in IRLS loop {loop_index}")]
    NotConverged { loop_index: usize },

    #[error("track file line {line}: {message}")]
    TrackFormat { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
