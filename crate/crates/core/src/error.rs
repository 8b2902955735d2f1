use thiserror::Error;

/// Errors surfaced by the simulator modules.
#[derive(Debug, Error)]
pub enum Error {
    /// An edge vanished, the polygon self-intersected, or the top sank
    /// below the bottom. Signals extinction / topology change; runs halt.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Explicit time step exceeds the CFL bound.
    #[error("unstable time step: {0}")]
    Stability(String),

    /// The integrated flow map failed a bijectivity check.
    #[error("flow map: {0}")]
    Flow(String),

    #[error("fixed-point iteration did not converge: {0}")]
    NoConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
