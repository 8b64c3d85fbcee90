use thiserror::Error;

/// Errors raised by the core operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unknown operation symbol `{0}`")]
    UnknownOp(String),

    #[error("operation `{op}` expects {expected} argument(s), got {got}")]
    ArityMismatch {
        op: String,
        expected: usize,
        got: usize,
    },

    #[error("name `{0}` is used both as a carrier element and as an operation symbol")]
    NameClash(String),

    #[error("trivial pair: empty carrier and no constants in the signature")]
    TrivialPair,

    #[error("value {value} is not on the grid with denominator {q}")]
    GridMismatch { value: String, q: u32 },

    #[error("discrete lifting is only available for the FREL, PMET and MET presets (got `{0}`)")]
    UnsupportedPreset(String),

    #[error("space violates the GMet specification: {0}")]
    SpecViolation(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("term `{0}` lies outside the bounded term universe")]
    OutOfUniverse(String),

    #[error("fact is not derived in this database: {0}")]
    UnknownFact(String),

    #[error("algebra is not a model of the theory: {0}")]
    NotAModel(String),

    #[error("map is not nonexpansive: {0}")]
    NotNonexpansive(String),

    #[error("Eilenberg-Moore law violated: {0}")]
    EmLawViolation(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
