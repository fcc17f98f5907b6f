use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the construction and simulation layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("argument {value} outside domain ({lo}, {hi})")]
    OutsideDomain { value: f64, lo: f64, hi: f64 },

    #[error("derivative order {requested} exceeds supported order {cap}")]
    DerivativeOrder { requested: usize, cap: usize },

    #[error("polynomial degree {degree} exceeds supported degree {cap}")]
    DegreeCap { degree: usize, cap: usize },

    #[error("second path component vanishes at t = {t}")]
    SingularSlope { t: f64 },

    #[error("path fails the non-parallelism condition (min |W| = {min_wronskian:e})")]
    ConditionFailed { min_wronskian: f64 },

    #[error("chart inversion did not converge after {iters} Newton steps (residual {residual:e} at x = {x}, target = {target})")]
    NewtonDiverged {
        iters: usize,
        residual: f64,
        x: f64,
        target: f64,
    },

    #[error("angular interval of length {len} cannot contain a direction of order {order} (need length > 1/order)")]
    IntervalTooShort { len: f64, order: usize },

    #[error("resonance search failed: {0}")]
    Search(String),

    #[error("jet order {requested} exceeds cap {cap}")]
    JetOrder { requested: usize, cap: usize },

    #[error("empty sample grid")]
    EmptyGrid,

    #[error("system assembly failed: {0}")]
    Assembly(String),

    #[error("integration failed: {0}")]
    Integration(String),
}
