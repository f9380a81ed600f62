use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mode: {0}")]
    InvalidMode(String),

    #[error("unknown mode label `{0}`")]
    UnknownLabel(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported configuration: {0}")]
    Capability(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("idle point undefined: g_p = 0 in idle detuning -g_qc^2/g_p")]
    DivisionByZero,

    #[error("resonant regime: detuning {0} rad/ns is zero, dispersive coupling g_p + g_qc^2/delta is undefined")]
    Resonant(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("step size underflow at t = {t} ns (h = {h:e})")]
    Stiffness { t: f64, h: f64 },

    #[error("numerical integrity: {0}")]
    Integrity(String),

    #[error("model integrity: {0}")]
    ModelIntegrity(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
