use thiserror::Error;

/// Errors raised while building channel descriptions or evaluating bounds.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid scattering function: {0}")]
    InvalidScattering(String),
    #[error("invalid grid parameters: {0}")]
    InvalidGrid(String),
    #[error("invalid quadrature spec: {0}")]
    InvalidQuadrature(String),
    #[error(
        "quadrature did not converge: relative change {relative_change:.3e} after {refinements} refinements (tolerance {tolerance:.1e})"
    )]
    QuadratureNonConvergence {
        relative_change: f64,
        refinements: usize,
        tolerance: f64,
    },
    #[error("invalid spatial correlation input: {0}")]
    InvalidSpatial(String),
    #[error("majorization undefined: {0}")]
    MajorizationUndefined(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("exact Toeplitz path limited to K <= {cap}, requested K = {k}")]
    ExactPathCap { k: usize, cap: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of a numerical routine rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::QuadratureNonConvergence { .. })
    }

    /// Stable snake_case tag for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidScattering(_) => "invalid_scattering",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidQuadrature(_) => "invalid_quadrature",
            Error::QuadratureNonConvergence { .. } => "quadrature_non_convergence",
            Error::InvalidSpatial(_) => "invalid_spatial",
            Error::MajorizationUndefined(_) => "majorization_undefined",
            Error::DimensionMismatch(..) => "dimension_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::ExactPathCap { .. } => "exact_path_cap",
            Error::InvalidScenario(_) => "invalid_scenario",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
