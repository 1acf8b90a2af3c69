use thiserror::Error;

use crate::dsl::ParseDiagnostic;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator is not Hermitian (max |H - H^dagger| = {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("state fidelity is undefined for a zero-purity input")]
    ZeroPurity,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no conditional rotation exists: transverse hyperfine coupling is zero")]
    NoGate,

    #[error("interaction-frame Hamiltonian drifts with tau by {drift:.3e} rad/us")]
    FrameDrift { drift: f64 },

    #[error("{0}")]
    Model(String),

    #[error("laser reset is not a unitary element")]
    NonUnitary,

    #[error("sequence `{0}` is empty")]
    EmptySequence(String),

    #[error("sequence contains a symbolic delay with no value bound")]
    UnboundTau,

    #[error("sequence must contain exactly one symbolic delay, found {0}")]
    TauSlots(usize),

    #[error("sweep grid is empty")]
    EmptyGrid,

    #[error("trace drifted by {drift:.3e} after element {index} ({element})")]
    TraceDrift {
        index: usize,
        element: String,
        drift: f64,
    },

    #[error("tomography design is degraded: condition number {cond:.3e} exceeds {bound:.3e}")]
    DegradedDesign { cond: f64, bound: f64 },

    #[error("{} parse error(s); first: {}", .0.len(), .0.first().map(|d| d.to_string()).unwrap_or_default())]
    Parse(Vec<ParseDiagnostic>),

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Physics-invariant violations, as opposed to malformed input.
    pub fn is_physics(&self) -> bool {
        matches!(
            self,
            Error::NotHermitian { .. }
                | Error::InvalidState(_)
                | Error::FrameDrift { .. }
                | Error::Model(_)
                | Error::TraceDrift { .. }
                | Error::DegradedDesign { .. }
        )
    }
}
