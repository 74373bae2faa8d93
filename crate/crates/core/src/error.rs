use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong in the numeric pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("series order mismatch ({left} vs {right})")]
    OrderMismatch { left: usize, right: usize },

    #[error("division by a series whose constant term is zero")]
    SingularDivision,

    #[error("inner series must have a zero constant term")]
    NonZeroConstant,

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("kernel evaluation failed: {0}")]
    Evaluation(String),

    #[error("backend error: {0}")]
    Backend(String),

    /// The taboo system `I - A(rho)` is singular or has spectral radius >= 1.
    #[error("taboo system is supercritical (spectral radius of the taboo kernel >= 1)")]
    Supercritical,

    #[error("state {0} is never returned to (g_ii = 0)")]
    NoReturn(usize),

    #[error("degenerate mean return time: b[1,0] = 0")]
    DegenerateMean,

    #[error("degenerate normalizer: e[0] = {0} is not positive")]
    DegenerateNormalizer(String),

    #[error("model order {have} is insufficient, expansion needs {need}")]
    InsufficientOrder { have: usize, need: usize },

    /// Survival probability vanished; `last` is the last conditional law that was still defined.
    #[error("survival probability vanished at step {step}")]
    HorizonTooLarge { step: usize, last: Vec<f64> },

    #[error("non-finite value produced")]
    NonFinite,

    #[error("model conditions not satisfied: {0}")]
    Conditions(String),
}
