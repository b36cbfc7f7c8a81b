use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("jet order {requested} exceeds supported maximum {max}")]
    JetOrderTooHigh { requested: usize, max: usize },

    #[error("functions live on different bases")]
    BaseMismatch,

    #[error("operators are defined on different lattices")]
    LatticeMismatch,

    #[error("function has unbounded support; a plane window cannot contain it")]
    UnboundedSupport,

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("segment from {from:?} along offset {offset:?} exits its chart")]
    SegmentExitsChart { from: Vec<f64>, offset: Vec<i64> },

    #[error("band limit {band} exceeds the cover closeness radius {radius} at level k = {k}")]
    BandExceedsCloseness { band: usize, radius: f64, k: u32 },

    #[error("torus quantization needs band limit < k/4, got band limit {band} at k = {k}")]
    BandTooWideForTorus { band: usize, k: u32 },

    #[error("horizontal field is not periodic; torus quantization needs a periodic field")]
    NonPeriodicField,

    #[error("star coefficient of order {0} is not available for this scheme")]
    UnsupportedOrder(usize),

    #[error("phase integration did not reach tolerance {0:e}")]
    PhaseNonConvergence(f64),

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("theta lattice sum truncation unreachable within {0} shells")]
    ThetaTruncation(usize),

    #[error("invalid Siegel form: {0}")]
    InvalidSiegelForm(String),

    #[error("invalid function: {0}")]
    InvalidFunction(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("check `{check}` failed: {detail}")]
    CheckFailed { check: String, detail: String },

    #[error("LAPACK routine failed with info = {0}")]
    Lapack(i32),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag for failure records.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::DimensionMismatch { .. } => "dimension_mismatch",
            Self::JetOrderTooHigh { .. } => "jet_order_too_high",
            Self::BaseMismatch => "base_mismatch",
            Self::LatticeMismatch => "lattice_mismatch",
            Self::UnboundedSupport => "unbounded_support",
            Self::WindowTooSmall(_) => "window_too_small",
            Self::SegmentExitsChart { .. } => "segment_exits_chart",
            Self::BandExceedsCloseness { .. } => "band_exceeds_closeness",
            Self::BandTooWideForTorus { .. } => "band_too_wide_for_torus",
            Self::NonPeriodicField => "non_periodic_field",
            Self::UnsupportedOrder(_) => "unsupported_order",
            Self::PhaseNonConvergence(_) => "phase_non_convergence",
            Self::QuadratureNonConvergence(_) => "quadrature_non_convergence",
            Self::ThetaTruncation(_) => "theta_truncation",
            Self::InvalidSiegelForm(_) => "invalid_siegel_form",
            Self::InvalidFunction(_) => "invalid_function",
            Self::Config(_) => "config",
            Self::CheckFailed { .. } => "check_failed",
            Self::Lapack(_) => "lapack",
            Self::Json(_) => "json",
            Self::Io(_) => "io",
        }
    }
}
