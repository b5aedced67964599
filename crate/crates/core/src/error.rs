use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("register `{0}` declared twice")]
    DuplicateRegister(String),
    #[error("register `{name}` has alphabet size {dim}; sizes must be at least 2")]
    RegisterTooSmall { name: String, dim: usize },
    #[error("layout dimension {dim} exceeds the cap {cap}")]
    LayoutTooLarge { dim: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("layouts differ")]
    LayoutMismatch,
    #[error("post-selection weight {0:.3e} is below 1e-12")]
    ZeroWeight(f64),
    #[error("input is not normalized (total {0})")]
    Unnormalized(f64),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("distributions have different supports ({0} vs {1} symbols)")]
    SupportMismatch(usize, usize),
    #[error("subsystems must share one alphabet size")]
    UnequalSubsystems,
    #[error("{0} subsystems requested; exact symmetrization is capped at 6")]
    TooManySubsystems(usize),
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("no backend implementation for oracle slot `{0}`")]
    UnresolvedSlot(String),
    #[error("query budget {budget} exceeded")]
    QueryBudgetExceeded { budget: usize },
    #[error("oracle family of size {size} exceeds the enumeration cap {cap}")]
    FamilyTooLarge { size: u128, cap: usize },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("advice exhausted: a row must be populated but no advice copy is left")]
    AdviceExhausted,
    #[error("pair database is full")]
    DatabaseFull,
    #[error("state left the valid advice manifold (weight outside {0:.3e})")]
    ManifoldViolation(f64),
    #[error("ancilla registers were not restored (residual weight {0:.3e})")]
    AncillaNotRestored(f64),
    #[error("transcript is inconsistent at step {0}")]
    InconsistentTranscript(usize),
    #[error("schedule mismatch: {0}")]
    ScheduleMismatch(String),
    #[error("the protocol is not public-coin")]
    NotPublicCoin,
    #[error("threshold {threshold} is not strictly between soundness {soundness} and completeness {completeness}")]
    InvalidThreshold { threshold: f64, soundness: f64, completeness: f64 },
    #[error("parameter inequality violated: {0}")]
    ParameterInequality(String),
    #[error("expected {expected} messages, found {found}")]
    WrongRoundCount { expected: usize, found: usize },
    #[error("adversary arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("no stored state under key {0:?}")]
    UnknownKey(Vec<usize>),
    #[error("all subsystems stored under key {0:?} are used")]
    DatabaseExhausted(Vec<usize>),
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cap violation: {0}")]
    CapViolation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
