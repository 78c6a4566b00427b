use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("depth {depth} too shallow for atom #{atom} (t = {t} must exceed {floor})")]
    DepthInsufficient {
        atom: usize,
        t: String,
        floor: String,
        depth: u32,
    },

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An invariant the construction guarantees was observed broken; always a bug.
    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),

    /// A conclusion of the stopping-time lemma failed to materialize.
    #[error("theorem violation: {0}")]
    TheoremViolation(String),

    #[error("hypothesis violated at {node}: nu(U) = {region_mass} > C * sigma = {allowed}")]
    HypothesisViolation {
        node: String,
        region_mass: String,
        allowed: String,
    },

    #[error("size cap exceeded: {0}")]
    Size(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
