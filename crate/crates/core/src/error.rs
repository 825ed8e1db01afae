use thiserror::Error;

/// Errors raised by the modeling, estimation and solver routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown {variable} category `{value}`")]
    UnknownCategory { variable: &'static str, value: String },

    #[error("unknown action dimension `{0}`")]
    UnknownDimension(String),

    #[error("invalid action structure: {0}")]
    InvalidStructure(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("observation has zero likelihood under the model")]
    ZeroLikelihood,

    #[error("sequence is empty")]
    EmptySequence,

    #[error("invalid sequence `{id}`: {reason}")]
    InvalidSequence { id: String, reason: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("duplicate sequence id `{0}`")]
    DuplicateSequence(String),

    #[error("ambiguous state labeling: {0}")]
    AmbiguousLabel(String),

    #[error("fixation list is empty")]
    EmptyFixations,

    #[error("fixation start frames are not strictly increasing at index {0}")]
    UnsortedFixations(usize),

    #[error("fixation at index {index} starts at frame {start}, outside 0..{n_frames}")]
    FixationOutOfRange { index: usize, start: i64, n_frames: usize },

    #[error("non-finite input value {0}")]
    NonFinite(f64),

    #[error("intersection window is empty or outside the recording")]
    EmptyWindow,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("all {0} restarts failed")]
    AllRestartsFailed(usize),

    #[error("cannot stratify dataset: {0}")]
    StratificationImpossible(String),

    #[error("value iteration did not converge after {0} iterations")]
    NonConvergence(usize),

    #[error("horizon {0} exceeds the exhaustive-oracle limit of 6")]
    HorizonTooLarge(usize),

    #[error("empty scenario specification")]
    EmptySpec,

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroLikelihood
                | Error::AmbiguousLabel(_)
                | Error::AllRestartsFailed(_)
                | Error::NonConvergence(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
