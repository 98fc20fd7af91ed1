use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while loading graphs, assembling games, or
/// evaluating the closed forms.
#[derive(Debug, Error)]
pub enum Error {
    #[error("edge list line {line}: {message}")]
    EdgeListParse { line: usize, message: String },

    #[error("self-loop at agent {agent}")]
    SelfLoop { agent: usize },

    #[error("duplicate edge ({a}, {b})")]
    DuplicateEdge { a: usize, b: usize },

    #[error("graph is disconnected")]
    Disconnected,

    #[error("agent {agent} has no neighbors")]
    IsolatedAgent { agent: usize },

    #[error("agent index {index} out of range for {n} agents")]
    AgentOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquareMatrix { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFiniteMatrix,

    #[error("integration limit must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("weighting matrix must be symmetric")]
    NonSymmetric,

    #[error(
        "boundary matrix is numerically singular (condition estimate {condition:.3e}); \
         no unique open-loop equilibrium exists for this configuration"
    )]
    SingularBoundaryMatrix { condition: f64 },

    #[error("trajectory carries no control samples")]
    MissingControls,

    #[error(
        "time grid too coarse for Simpson quadrature: {points} points (need an odd count >= 3)"
    )]
    GridTooCoarse { points: usize },

    #[error("time {t} outside horizon [0, {t_f}]")]
    OutsideHorizon { t: f64, t_f: f64 },

    #[error("state became non-finite during integration at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("control produced non-finite values at t = {t}")]
    NonFiniteControl { t: f64 },

    #[error("linear algebra breakdown: {0}")]
    Numerical(String),
}
