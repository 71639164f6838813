use thiserror::Error;

pub type Result<T, E = RwsError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RwsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite payoff at {matrix}[{row}][{col}]")]
    NonFinitePayoff {
        matrix: &'static str,
        row: usize,
        col: usize,
    },

    #[error("unknown built-in game `{0}` (known: matching-pennies, unstable-rps, three-by-two-example, coordination)")]
    UnknownGame(String),

    #[error("invalid game document: {0}")]
    GameDocument(String),

    #[error("invalid probability vector: {0}")]
    NotASimplexVector(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "sample grid has {size} points (cap {cap}); use Monte Carlo estimation for this k and strategy count"
    )]
    GridCapExceeded { size: u128, cap: usize },

    #[error("game too large: {0}")]
    GameTooLarge(String),

    #[error("history approximation requires (1 - beta) * m <= 1, got (1 - {beta}) * {m} = {value}")]
    HistoryPrecondition { beta: f64, m: usize, value: f64 },

    #[error("fixed point solver: {0}")]
    FixedPoint(String),

    #[error("integer cut-off: x_hat_{role} * k = {value} is an integer (k = {k})")]
    IntegerCutoff { role: usize, k: u32, value: f64 },

    #[error("step size too large: renormalization drift {drift:e} exceeds {bound:e} at t = {t}; use a smaller dt")]
    StepSize { drift: f64, bound: f64, t: f64 },

    #[error("{0}")]
    Estimator(String),
}
