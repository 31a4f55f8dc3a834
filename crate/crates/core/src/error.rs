use thiserror::Error;

/// Error taxonomy shared by the whole toolkit.
///
/// `Param` covers rejected inputs, `Truncated` covers trajectories that left
/// their finite simulation window, `Stats` covers runs whose output cannot be
/// trusted (too few replicas, discard cap exceeded), and `Invariant` flags
/// internal contract violations that should abort a run rather than produce
/// silently wrong numbers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("trajectory left the simulation window at t = {time}: {context}")]
    Truncated { time: f64, context: String },

    #[error("statistical validity: {0}")]
    Stats(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("cache format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub fn stats(msg: impl Into<String>) -> Self {
        Error::Stats(msg.into())
    }

    pub fn truncated(time: f64, context: impl Into<String>) -> Self {
        Error::Truncated {
            time,
            context: context.into(),
        }
    }

    /// True for errors that a replica-discard policy may swallow (counted
    /// against the discard cap) rather than abort the whole experiment.
    pub fn is_discardable(&self) -> bool {
        matches!(self, Error::Truncated { .. })
    }
}
