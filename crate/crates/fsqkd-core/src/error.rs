use alloc::string::String;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Error categories surfaced by the simulation toolkit.
///
/// The categories map onto the process exit codes used by the command-line
/// frontend: configuration errors, data errors, and decoy-bound failures are
/// distinguishable by the caller.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid configuration (out-of-range probability, bad intensity
    /// ordering, unknown parameter path, ...).
    #[error("configuration: {0}")]
    Config(String),

    /// Malformed or inconsistent input data (out-of-range slot index,
    /// non-finite sensor reading, unnormalized amplitudes, ...).
    #[error("data: {0}")]
    Data(String),

    /// A statistic is undefined for the given input (zero counts, empty or
    /// degenerate sample sets).
    #[error("undefined statistic: {0}")]
    Statistic(String),

    /// Turbulence so weak that the Fried parameter is unbounded; reported as
    /// a flag instead of a numeric infinity.
    #[error("infinite resolution: {0}")]
    InfiniteResolution(String),

    /// The decoy-state bounds could not be evaluated from the available
    /// counts; the secure key length is zero in this case.
    #[error("decoy bound failure: {0}")]
    BoundFailure(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn statistic(msg: impl Into<String>) -> Self {
        Error::Statistic(msg.into())
    }
}
