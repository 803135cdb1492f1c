use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("mollifier scale {eps} is under-resolved (need eps >= 4dx = {min_x} and eps^2 >= 4dt = {min_t})")]
    UnderResolved { eps: f64, min_x: f64, min_t: f64 },
    #[error("numerical blow-up at step {step} (|value| = {value:e})")]
    BlowUp { step: usize, value: f64 },
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("derivative self-check failed for {name}: order {order} at u = {at}, error {err:e}")]
    DerivativeCheck { name: String, order: usize, at: f64, err: f64 },
    #[error("no function assigned to type `{0}`")]
    Unassigned(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("field shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Core(#[from] mallitree::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type NumResult<T> = std::result::Result<T, NumError>;
