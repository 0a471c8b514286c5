use thiserror::Error;

/// Errors raised across the engine.
///
/// Check failures that carry a witness are reported through
/// [`crate::expr::Verdict`] and report records, not through this type; an
/// `Error` means an operation could not produce its result at all.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("jet order {order} exceeds the declared maximum {max}")]
    JetOrderExceeded { order: usize, max: usize },

    #[error("pole while evaluating `{subexpr}` at {point}")]
    Pole { subexpr: String, point: String },

    #[error("domain error while evaluating `{subexpr}` at {point}")]
    Domain { subexpr: String, point: String },

    #[error("unbound symbol `{0}` during evaluation")]
    Unbound(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("`{expr}` is not invariant under field {field}")]
    NotInvariant { expr: String, field: usize },

    #[error("rank of the field set varies across samples ({0})")]
    ConstantRankViolation(String),

    #[error("fields are not in involution: {0}")]
    NonInvolutive(String),

    #[error("the fields are not a standard symmetry of the system: {0}")]
    NotStandardSymmetry(String),

    #[error("the scaling function is identically zero")]
    ZeroScaling,

    #[error("no solved form available: {0}")]
    NoSolvedForm(String),

    #[error("wrong invariant count: expected {expected}, got {got}")]
    WrongCount { expected: usize, got: usize },

    #[error("no invariant found: {0}")]
    NotFound(String),

    #[error("`{target}` is not expressible in the requested variables ({detail})")]
    NotExpressible { target: String, detail: String },

    #[error("no common scalar factor: {0}")]
    NoCommonFactor(String),

    #[error("the chain map is rank deficient for pivot u{pivot}")]
    RankDeficientChain { pivot: usize },

    #[error("Newton inversion did not converge: {0}")]
    NewtonDivergence(String),

    #[error("integration step too large: halved-step rerun differs by {discrepancy:e}")]
    StepTooLarge { discrepancy: f64 },

    #[error("trajectory hit a pole at t = {time}")]
    BlowUp { time: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("problem file line {line}: {message}")]
    Problem { line: usize, message: String },

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
