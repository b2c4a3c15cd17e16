use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("malformed document at {location}: {message}")]
    Malformed { location: String, message: String },

    #[error("unknown element `{element}` at {location}")]
    UnknownElement { element: String, location: String },

    #[error("arity mismatch at {location}: expected {expected}, found {found}")]
    ArityMismatch {
        location: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate universe element `{element}` at {location}")]
    DuplicateElement { element: String, location: String },

    #[error("duplicate relation name `{0}`")]
    DuplicateRelation(String),

    #[error("relation `{name}` has arity {arity}; arities must be at least 1")]
    InvalidArity { name: String, arity: usize },

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("combinatorial budget exceeded: {what} needs {needed} candidates, budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u64,
    },

    #[error("k = {k} is below the relational width {width}")]
    WidthTooSmall { k: usize, width: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("context {sub:?} is not a subset of {context:?}")]
    NotASubset { sub: Vec<u32>, context: Vec<u32> },

    #[error("section {values:?} is not present at context {context:?}")]
    SectionNotPresent { context: Vec<u32>, values: Vec<u32> },

    #[error("context {0:?} is not maximal")]
    NotMaximal(Vec<u32>),

    #[error("operation requires a family in {expected} mode")]
    ModeMismatch { expected: &'static str },

    #[error("universe mismatch: {0}")]
    UniverseMismatch(String),

    #[error("operator `{operator}` is not shrinking: section {values:?} appeared at context {context:?}")]
    NotShrinking {
        operator: String,
        context: Vec<u32>,
        values: Vec<u32>,
    },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("vocabulary is not binary: relation `{0}`")]
    NonBinaryVocabulary(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
