use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A group schema failed one of its invariants. `invariant` is a stable
    /// short name (`antisymmetry`, `grading`, `jacobi`, ...).
    #[error("schema invariant `{invariant}` violated: {detail}")]
    Schema {
        invariant: &'static str,
        detail: String,
    },

    #[error("schema parse error: {0}")]
    Parse(String),

    #[error("unknown builtin schema `{0}`")]
    UnknownSchema(String),

    #[error("dilation factor must be positive, got {0}")]
    NonPositiveDilation(f64),

    #[error("index {j} is not a horizontal direction (first stratum has dimension {n1})")]
    NotHorizontal { j: usize, n1: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("map evaluation failed: {0}")]
    Evaluation(String),

    #[error("finite-difference extrapolation did not converge (discrepancy {0:e})")]
    NonConvergence(f64),

    #[error("graded homomorphism completion is inconsistent (residual {0:e})")]
    InconsistentCompletion(f64),

    #[error("curve segment {segment} is not horizontal (relative defect {defect:e})")]
    NonHorizontal { segment: usize, defect: f64 },

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown or malformed map `{0}`")]
    UnknownMap(String),

    #[error("map `{0}` has no Lipschitz estimate")]
    MissingLipschitz(String),

    #[error("differential estimation failed at {failed} of {total} quadrature nodes")]
    DifferentialBudget { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
