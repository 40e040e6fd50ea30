use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid subsystem selector: {0}")]
    Selector(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("operator is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("expected a pure state: {0}")]
    NotPure(String),

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("malformed protocol: {0}")]
    InvalidProtocol(String),

    #[error("degenerate protocol: average success probability is zero")]
    DegenerateProtocol,

    #[error("phase-2 angle calibration failed: {0}")]
    Calibration(String),

    #[error("G~ data error: {0}")]
    Gtilde(String),

    #[error("infeasible dual certificate: {reason} (worst eigenvalue {worst_eigenvalue:.3e})")]
    InfeasibleCertificate { reason: String, worst_eigenvalue: f64 },

    #[error("SDP error: {0}")]
    Sdp(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl std::fmt::Debug, found: impl std::fmt::Debug) -> Self {
        Error::DimensionMismatch {
            expected: format!("{expected:?}"),
            found: format!("{found:?}"),
        }
    }
}
