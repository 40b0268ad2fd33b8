use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid AR order {0}: expected 1..=10")]
    InvalidOrder(u32),

    #[error("Daley length-scale is undefined for AR order {0} (requires M >= 2)")]
    UndefinedDaley(u32),

    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("size {size} exceeds dense-path limit {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("selection stride {zeta} does not divide grid size {n}")]
    Divisibility { n: usize, zeta: usize },

    #[error("circle series truncation {truncation} too small: tail ratio {tail_ratio:e}")]
    InsufficientTruncation { truncation: usize, tail_ratio: f64 },

    #[error("m^2 c_m series diverges for AR order {0}")]
    DivergentSeries(u32),

    #[error("CG breakdown at iteration {iteration}: <p, Sp> = {curvature:e} is not positive")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("ensemble aborted at realization {realization}: {source}")]
    Realization {
        realization: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("inflation search did not bracket a minimum below upsilon = {limit}")]
    SearchRange { limit: f64 },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidOrder(_) => "invalid_order",
            Error::UndefinedDaley(_) => "undefined_daley",
            Error::NegativeDistance(_) => "negative_distance",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::SizeGuard { .. } => "size_guard",
            Error::Divisibility { .. } => "divisibility",
            Error::InsufficientTruncation { .. } => "insufficient_truncation",
            Error::DivergentSeries(_) => "divergent_series",
            Error::Breakdown { .. } => "breakdown",
            Error::Realization { source, .. } => source.kind(),
            Error::SearchRange { .. } => "search_range",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Breakdown { .. }
            | Error::SearchRange { .. }
            | Error::InsufficientTruncation { .. }
            | Error::DivergentSeries(_)
            | Error::SizeGuard { .. } => true,
            Error::Realization { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
