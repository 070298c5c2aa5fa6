use thiserror::Error;

/// Every failure mode of the library.  Variants are grouped so that callers
/// (notably the CLI) can map them onto coarse exit categories via
/// [`QcertError::category`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QcertError {
    #[error("invalid machine: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("wrong coherence class: expected {expected}, found {found}")]
    WrongClass { expected: String, found: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("unsupported coherence topology: {0}")]
    UnsupportedTopology(String),
    #[error("steady-state kernel has dimension {dim} (expected 1); excise decoupled levels first")]
    DegenerateKernel { dim: usize },
    #[error("ill-conditioned problem: {0}")]
    Conditioning(String),
    #[error("matrix dimension {dim} exceeds the supported maximum {max}")]
    DimensionOverflow { dim: usize, max: usize },
    #[error("no classical equivalent: {0}")]
    Infeasible(String),
    #[error("trajectory reached absorbing level {0}")]
    Absorbing(usize),
    #[error("simulation failure: {0}")]
    Simulation(String),
}

/// Coarse classification used for process exit codes and sweep statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Conditioning,
    Infeasible,
    Other,
}

impl QcertError {
    pub fn category(&self) -> ErrorCategory {
        use QcertError::*;
        match self {
            Validation(_) | Domain(_) | Config(_) | WrongClass { .. } | NotFound(_) => {
                ErrorCategory::Validation
            }
            UnsupportedTopology(_) => ErrorCategory::Validation,
            DegenerateKernel { .. } | Conditioning(_) | DimensionOverflow { .. } => {
                ErrorCategory::Conditioning
            }
            Infeasible(_) => ErrorCategory::Infeasible,
            Absorbing(_) | Simulation(_) => ErrorCategory::Other,
        }
    }
}

pub type Result<T> = std::result::Result<T, QcertError>;
