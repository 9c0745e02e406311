use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is singular (pivot {pivot:e} in column {column})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid problem definition: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("iterate is not interior: {which}[{index}] = {value:e}")]
    InteriorityViolation {
        which: &'static str,
        index: usize,
        value: f64,
    },

    #[error("direction-finding subproblem is infeasible (phase-1 residual {residual:e})")]
    InfeasibleSubproblem { residual: f64 },

    #[error("subproblem is unbounded below")]
    UnboundedSubproblem,

    #[error("active-set solver hit its iteration limit ({limit})")]
    IterationLimit { limit: usize },

    #[error("no penalty exponent p <= {p_max} satisfies the model-decrease condition")]
    ExponentOverflow { p_max: u32 },

    #[error("Armijo search failed after {trials} trials")]
    LineSearchFailure { trials: usize },

    #[error("trust-region radius {delta:e} fell below the floor {delta_min:e}")]
    RadiusCollapse { delta: f64, delta_min: f64 },

    #[error("trace has {actual} rows, at least {required} required")]
    TraceTooShort { required: usize, actual: usize },
}
