use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed tree: {0}")]
    Structure(String),

    #[error("unknown type `{0}`")]
    UnknownType(String),

    #[error("type `{0}` is a noise type, expected a kernel type")]
    NotAKernel(String),

    #[error("assumption on noises violated: {0}")]
    NoiseAssumption(String),

    #[error("rule is not subcritical: {0}")]
    NotSubcritical(String),

    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),

    #[error("invalid tree code at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("node {0} is not a node of the tree")]
    NotANode(usize),

    #[error("invalid edge: {0}")]
    InvalidEdge(String),

    #[error("malformed dual tree: {0}")]
    MalformedDual(String),

    #[error("invalid ordering: {0}")]
    InvalidOrder(String),

    #[error("undefined nonlinearity: {0}")]
    UndefinedNonlinearity(String),

    #[error("expression already depends on the direction variable {0}")]
    DirectionPresent(String),

    #[error("simplicity assumption violated: {0}")]
    Simplicity(String),

    #[error("mode precondition violated: {0}")]
    Mode(String),

    #[error("spec file: {0}")]
    Spec(String),
}
