use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes of the numerical pipeline.
///
/// Every variant maps to a stable kebab-case name (see [`Error::name`]) that
/// the command-line driver echoes on exit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shooting bracket [{lo}, {hi}] does not straddle the ground state")]
    BracketNotFound { lo: f64, hi: f64 },

    #[error("shooting did not reach tolerance after {iterations} bisections")]
    ToleranceNotReached { iterations: usize },

    #[error("decay fit window not asymptotic: {0}")]
    WindowNonconvergent(String),

    #[error("eigensolver failed: {0}")]
    SpectralSolverFailure(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureNonconvergent(String),

    #[error("function decays too slowly on its grid: {0}")]
    IntegrabilityViolation(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("grid mismatch between fields")]
    GridMismatch,

    #[error("grid needs {needed} nodes per axis, cap is {cap}")]
    GridTooLarge { needed: usize, cap: usize },

    #[error("iterative solver diverged: {0}")]
    SolverDivergence(String),

    #[error("source not decayed at the boundary (max boundary/max interior = {ratio:.3e})")]
    BoundaryContamination { ratio: f64 },

    #[error("tangent Gram matrix is singular (condition estimate {condition:.3e})")]
    GramSingular { condition: f64 },

    #[error("auxiliary fixed-point iteration is not contracting at eps = {eps}")]
    ContractionFailure { eps: f64 },

    #[error("linear solver stagnated at relative residual {relative_residual:.3e}")]
    LinearSolverStagnation { relative_residual: f64 },

    #[error("all {starts} minimisation starts were infeasible")]
    AllStartsInfeasible { starts: usize },

    #[error("minimiser pinned to the constraint boundary (smallest slack {min_slack:.3e})")]
    BoundaryActive { min_slack: f64 },

    #[error("scaling fit unstable: R^2 = {r_squared:.5}")]
    FitUnstable { r_squared: f64 },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::BracketNotFound { .. } => "bracket-not-found",
            Error::ToleranceNotReached { .. } => "tolerance-not-reached",
            Error::WindowNonconvergent(_) => "window-nonconvergent",
            Error::SpectralSolverFailure(_) => "spectral-solver-failure",
            Error::QuadratureNonconvergent(_) => "quadrature-nonconvergent",
            Error::IntegrabilityViolation(_) => "integrability-violation",
            Error::GridTooSmall(_) => "grid-too-small",
            Error::GridMismatch => "grid-mismatch",
            Error::GridTooLarge { .. } => "grid-too-large",
            Error::SolverDivergence(_) => "solver-divergence",
            Error::BoundaryContamination { .. } => "boundary-contamination",
            Error::GramSingular { .. } => "gram-singular",
            Error::ContractionFailure { .. } => "contraction-failure",
            Error::LinearSolverStagnation { .. } => "linear-solver-stagnation",
            Error::AllStartsInfeasible { .. } => "all-starts-infeasible",
            Error::BoundaryActive { .. } => "boundary-active",
            Error::FitUnstable { .. } => "fit-unstable",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::Parse(_))
    }
}
