use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("constraint angles {0} and {1} coincide")]
    DuplicateConstraintAngle(usize, usize),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid constraint set: {0}")]
    InvalidConstraints(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("beam {beam}: {source}")]
    Beam {
        beam: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("spatial spectrum is identically zero")]
    AllZeroSpectrum,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("no second peak clears the separation and level rules")]
    NoSecondPeak,
    #[error("training set must contain both same and different pairs")]
    DegenerateTrainingSet,
    #[error("unknown speaker id {0}")]
    UnknownSpeakerId(usize),
    #[error("scheduled utterances {0} and {1} overlap")]
    ScheduleOverlap(usize, usize),
    #[error("reference annotation contains no speech")]
    EmptyReference,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Wav(#[from] hound::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
