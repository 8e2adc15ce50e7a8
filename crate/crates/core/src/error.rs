use thiserror::Error;

/// Error type shared by every module in this crate.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Game definition violates its own invariants (n < 2, bad state
    /// distribution, negative payoff).
    #[error("invalid game: {0}")]
    InvalidGame(String),

    /// Request would blow past a resource guard (strategy-space size,
    /// payoff-table memory, integer overflow in exact counts).
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// Arguments are individually well-formed but mutually inconsistent.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A weight vector has no mass left, so selection probabilities are
    /// undefined.
    #[error("degenerate state: {0}")]
    DegenerateState(String),

    /// Configuration rejected before any simulation work started.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// An internal calling contract was broken (e.g. crediting a payoff to
    /// the agent's own link).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Snapshot write failed mid-run; `round` says how far the run got.
    #[error("snapshot i/o at round {round}: {source}")]
    SnapshotIo {
        round: u64,
        #[source]
        source: std::io::Error,
    },

    /// Snapshot bytes did not match the documented layout.
    #[error("snapshot format: {0}")]
    SnapshotFormat(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
