//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Point or parameter lies outside the chart domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Chart geometry unusable for the requested operation.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Metric near-singular or a linear system too ill-conditioned to trust.
    #[error("conditioning error: {0}")]
    Conditioning(String),

    /// Grid too coarse for the requested stencil or smoothing length.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Compact support requirement violated (data touches the grid edge).
    #[error("margin error: {0}")]
    Margin(String),

    /// Caller broke an operation contract (mismatched grids, missing tags, ...).
    #[error("contract error: {0}")]
    Contract(String),

    /// ODE state blew up or an integrator tolerance could not be met.
    #[error("integration error: {0}")]
    Integration(String),

    /// Fermi frame construction failed (tube too wide, frame degenerate).
    #[error("frame error: {0}")]
    Frame(String),

    /// Quasimode construction failed (wrong curvature assembly, bad gluing).
    #[error("construction error: {0}")]
    Construction(String),

    /// Gauge construction failed; carries the loop certificate that broke it.
    #[error("gauge error: {0}")]
    Gauge(String),

    /// Invalid experiment or chart configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Semiclassical or smoothing parameter out of range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Field sampling left the grid while following a curve.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// Geometry is outside the supported class (non-simple transversal, ...).
    #[error("unsupported geometry: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
