use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular configuration: points {0} and {1} coincide")]
    SingularPair(usize, usize),

    #[error("kernel evaluated on the diagonal")]
    SingularKernel,

    #[error("point lies outside the domain ({0})")]
    OutsideDomain(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("density concentrated: mass fraction {mass_fraction:.3} in a single cell")]
    Concentration { mass_fraction: f64 },

    #[error("energy {eps} is below the ground-state energy {eps0}")]
    Infeasible { eps: f64, eps0: f64 },

    #[error("line search failed to improve the objective")]
    LineSearch,

    #[error("inverse temperature {beta} is not the critical value {expected}")]
    NotCritical { beta: f64, expected: f64 },

    #[error("target integral curvature {kappa} outside the admissible range ({lo}, {hi})")]
    KappaOutOfRange { kappa: f64, lo: f64, hi: f64 },

    #[error("bisection bracket does not straddle the target ({lo:.4e}, {hi:.4e})")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("selection is empty")]
    EmptySelection,

    #[error("all circulations are zero; the Hamiltonian is identically zero")]
    DegenerateCirculations,

    #[error("energy window not fully visited: {visited} of {bins} bins")]
    WindowNotVisited { visited: usize, bins: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
