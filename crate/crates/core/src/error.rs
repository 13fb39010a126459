use thiserror::Error;

/// Errors produced by the localization toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("hyperfine inversion has no real solution (residual {residual:.3e} Hz^2)")]
    Inversion { residual: f64 },

    #[error("singular denominator in {term}")]
    Singularity { term: String },

    #[error("ambiguous eigenstate labelling: best overlap {overlap:.3} for state {state}")]
    Labeling { state: String, overlap: f64 },

    #[error("label {label} has no measured coupling to the placed set")]
    Connectivity { label: String },

    #[error("measurement graph is disconnected; unreachable labels: {}", .labels.join(", "))]
    Disconnected { labels: Vec<String> },

    #[error("no placement survives at step {step} (label {label})")]
    Infeasible { step: usize, label: String },

    #[error("optimizer did not converge after {iterations} iterations (residual {residual:.6e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("minimum at scan boundary (delta_B = {delta_b} G); widen the grid")]
    ScanBoundary { delta_b: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl Error {
    /// Stable snake_case name used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Domain(_) => "domain",
            Error::Capacity(_) => "capacity",
            Error::Inversion { .. } => "inversion",
            Error::Singularity { .. } => "singularity",
            Error::Labeling { .. } => "labeling",
            Error::Connectivity { .. } => "connectivity",
            Error::Disconnected { .. } => "disconnected",
            Error::Infeasible { .. } => "infeasible",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Internal(_) => "internal",
            Error::ScanBoundary { .. } => "scan_boundary",
            Error::Fit(_) => "fit",
            Error::InsufficientStatistics(_) => "insufficient_statistics",
            Error::LabelMismatch(_) => "label_mismatch",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}
