use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("vertex {vertex} has even degree {degree}")]
    DegreeParity { vertex: usize, degree: usize },

    #[error("cyclic input")]
    Cyclic,

    #[error("disconnected input: vertex {vertex} is unreachable from the root")]
    Disconnected { vertex: usize },

    #[error("opinion vector has length {got}, graph has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tree has {0} vertices, at least 5 are required")]
    TooSmall(usize),

    #[error("enumeration of {required} cases exceeds the budget of {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("path is not admissible: {0}")]
    InadmissiblePath(String),

    #[error("tree is not binary-rooted: {0}")]
    NotBinary(String),

    /// The engine observed something that a proven theorem rules out.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, printed by the CLI on domain errors.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "PARSE_ERROR",
            Error::DegreeParity { .. } => "DEGREE_PARITY",
            Error::Cyclic => "CYCLIC_INPUT",
            Error::Disconnected { .. } => "DISCONNECTED_INPUT",
            Error::LengthMismatch { .. } => "INIT_LENGTH_MISMATCH",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::TooSmall(_) => "TREE_TOO_SMALL",
            Error::BudgetExceeded { .. } => "BUDGET_EXCEEDED",
            Error::InadmissiblePath(_) => "INADMISSIBLE_PATH",
            Error::NotBinary(_) => "NOT_BINARY_ROOTED",
            Error::Invariant(_) => "INVARIANT_VIOLATION",
            Error::Io(_) => "IO_ERROR",
        }
    }
}

pub(crate) fn check_budget(required: u128, budget: u128) -> Result<()> {
    if required > budget {
        Err(Error::BudgetExceeded { required, budget })
    } else {
        Ok(())
    }
}
