use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergent integral: kernel alpha = {alpha} must exceed 1 - 2H = {bound}")]
    Divergent { alpha: f64, bound: f64 },

    #[error("Gram matrix of kernel `{kernel}` is not positive semidefinite (pivot {pivot:e} at row {row})")]
    NotPositiveSemidefinite {
        kernel: String,
        row: usize,
        pivot: f64,
    },

    #[error("side conditions violated: {0}")]
    SideConditions(String),

    #[error("{flagged} of {samples} Monte Carlo weights were not finite")]
    NonFiniteWeights { flagged: u64, samples: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("outside the desk-scale envelope ({0}); set `allow_large` to run anyway")]
    Envelope(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
