//! Error taxonomy shared by all modules.

use crate::mat::SymmetricMatrix;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Bad caller input: dimension mismatch, non-finite data, invalid range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix inverse was requested too close to singularity.
    #[error("singular matrix (smallest |eigenvalue| = {min_abs_eigenvalue:.3e})")]
    Singular { min_abs_eigenvalue: f64 },

    /// An eigenvalue or linear solve failed to produce finite output.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Iteration hit the step limit before meeting its tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// The synthesis problem is infeasible at the requested attenuation level.
    #[error("infeasible at iteration {iteration}: {constraint}")]
    Infeasible {
        iteration: usize,
        constraint: String,
        /// The iterate that violated the constraint.
        iterate: SymmetricMatrix,
    },

    /// The inner maximization grows at the search boundary; the game value
    /// appears unbounded. A larger attenuation level usually fixes this.
    #[error("unbounded game: {0}; try a larger gamma")]
    UnboundedGame(String),

    /// Bisection bracket does not straddle a single feasibility transition.
    #[error("ambiguous bracket: {0}")]
    AmbiguousBracket(String),

    /// The problem data makes the requested quantity undefined (e.g. T = P).
    #[error("degenerate problem: {0}")]
    Degenerate(String),

    /// Simulated state exceeded the explosion threshold.
    #[error("state diverged at step {step} (|x| = {state_norm:.3e})")]
    Divergence { step: usize, state_norm: f64 },

    /// Worst-case disturbance is undefined because P is not below gamma^2 I.
    #[error("infeasible adversary: {0}")]
    InfeasibleAdversary(String),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>) -> Self {
        Error::InvalidArgument(context.into())
    }
}
