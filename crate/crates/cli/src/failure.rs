use mallitree::Error;
use mallitree_numerics::NumError;
use serde_json::Value;

/// Exit codes. Stable; documented in the README.
pub mod code {
    pub const INTERNAL: i32 = 1;
    pub const SPEC: i32 = 2;
    pub const NOT_SUBCRITICAL: i32 = 3;
    pub const SIMPLICITY: i32 = 4;
    pub const VERIFY: i32 = 5;
    pub const BLOW_UP: i32 = 6;
}

/// A command outcome that ends the process with a nonzero code. A report,
/// when present, is still printed on stdout.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    pub report: Option<Value>,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), report: None }
    }

    pub fn with_report(mut self, report: Value) -> Self {
        self.report = Some(report);
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let c = match &e {
            Error::Spec(_)
            | Error::Parse { .. }
            | Error::UnknownType(_)
            | Error::NotAKernel(_)
            | Error::NoiseAssumption(_)
            | Error::UndefinedNonlinearity(_)
            | Error::Mode(_) => code::SPEC,
            Error::NotSubcritical(_) => code::NOT_SUBCRITICAL,
            Error::Simplicity(_) => code::SIMPLICITY,
            _ => code::INTERNAL,
        };
        Failure::new(c, e.to_string())
    }
}

impl From<NumError> for Failure {
    fn from(e: NumError) -> Self {
        let c = match &e {
            NumError::Core(inner) => return Failure::from(inner.clone()),
            NumError::BlowUp { .. } => code::BLOW_UP,
            NumError::Grid(_)
            | NumError::UnderResolved { .. }
            | NumError::Config(_)
            | NumError::DerivativeCheck { .. }
            | NumError::Unassigned(_) => code::SPEC,
            _ => code::INTERNAL,
        };
        Failure::new(c, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(code::INTERNAL, format!("i/o: {e}"))
    }
}

pub type CmdResult = Result<Value, Failure>;
