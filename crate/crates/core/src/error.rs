use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A positive-capacity cluster exceeded its size cap, or the capacity law
    /// is outside the regime an operation requires.
    #[error("regime error: {0}")]
    Regime(String),

    #[error("window overflow: lateral margin {margin} exceeds cap {cap}")]
    WindowOverflow { margin: i64, cap: i64 },

    /// A checked invariant failed (duality, cut validity, coupling audit...).
    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) => "invalid_geometry",
            Error::DegenerateRegion(_) => "degenerate_region",
            Error::InvalidDistribution(_) => "invalid_distribution",
            Error::InvalidInput(_) => "invalid_input",
            Error::Regime(_) => "regime",
            Error::WindowOverflow { .. } => "window_overflow",
            Error::Assertion(_) => "assertion",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
