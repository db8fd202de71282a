use thiserror::Error;

use crate::space::HypothesisId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("hypothesis {0} appears in more than one block of the partition")]
    Overlap(HypothesisId),
    #[error("hypothesis {0} of the universe is not covered by the partition")]
    Uncovered(HypothesisId),
    #[error("hypothesis {0} lies outside the universe")]
    Foreign(HypothesisId),
    #[error("universe mismatch: expected {expected} hypotheses, got {actual}")]
    UniverseMismatch { expected: String, actual: String },
    #[error("universe holds {0} hypotheses; at most {max} are supported", max = crate::space::MAX_HYPOTHESES)]
    UniverseTooLarge(usize),
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("answer {answer} has zero probability; cannot condition on it")]
    ImpossibleAnswer { answer: u8 },
    #[error("partition is not discriminating: {0}")]
    NotDiscriminating(String),
    #[error("pool element {index} is not a discriminating partition")]
    NonDiscriminatingPoolElement { index: usize },
    #[error("empty pool")]
    EmptyPool,
    #[error("invalid measure spec `{spec}`: offending token `{token}`")]
    MeasureParse { spec: String, token: String },
    #[error("invalid measure parameters: {0}")]
    MeasureParams(String),
    #[error("threshold argument {0} outside (0, 0.5)")]
    ThresholdDomain(f64),
    #[error("universe of {size} hypotheses exceeds the enumeration cap of {cap}; use sampling instead")]
    EnumerationCap { size: usize, cap: usize },
    #[error("degenerate universe: {0}")]
    DegenerateUniverse(String),
    #[error("invalid box geometry: {0}")]
    Geometry(String),
    #[error("no realizable goal partition found (tried {tried} goals)")]
    NoRealizableGoal { tried: usize },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
