//! Error taxonomy shared by all modules.

use thiserror::Error;

/// Errors surfaced by the solvers, the LP engine and the map builders.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested point lies at or beyond the phase boundary, where the
    /// order parameters diverge and the optimization is no longer feasible.
    #[error("infeasible region: alpha={alpha}, r={r} is at or beyond the phase boundary r*={boundary}")]
    InfeasibleRegion { alpha: f64, r: f64, boundary: f64 },

    /// An iterative solver exhausted its budget without meeting tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A numerical routine failed (singular basis, cycling budget, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// No point of the alpha grid brackets the requested contour level.
    #[error("empty contour: level {level} of {metric} is not attained on the grid")]
    EmptyContour { metric: String, level: f64 },

    /// Every sample of an ensemble was unbounded; no statistics can be formed.
    #[error("all {0} samples were infeasible (unbounded LP)")]
    AllInfeasible(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
