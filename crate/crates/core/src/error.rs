use thiserror::Error;

/// Errors raised by the laboratory. The variants mirror the failure classes
/// the command line maps onto exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Shapes, lengths or grids that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// A parameter choice that cannot be honoured (grid too small, support
    /// beyond the Nyquist margin, bad sweep list, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A quantity that is undefined for the given input (zero vector, zero
    /// norm, time outside a window, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A mathematical precondition of the requested check does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Requested combination is deliberately not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
