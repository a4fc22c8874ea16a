use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("edge ({from}, {to}) violates DAG order: source must precede target")]
    DagOrder { from: usize, to: usize },

    #[error("node {node} out of range 1..={n_nodes}")]
    NodeOutOfRange { node: usize, n_nodes: usize },

    #[error("matrix is not strictly upper triangular binary: entry ({row}, {col})")]
    NotTriangular { row: usize, col: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    /// The evidence has zero probability under every state in the support.
    #[error("zero-likelihood event: {0}")]
    ZeroLikelihood(String),

    #[error("exact incest removal not achievable at node {node}: needs beliefs of {missing:?}")]
    NotAchievable { node: usize, missing: Vec<usize> },

    #[error("missing belief for node {node}")]
    MissingBelief { node: usize },

    #[error("supplied beliefs cannot reconstruct the incest-free posterior at node {node}")]
    InsufficientBeliefs { node: usize },

    #[error("no observation sequence reproduces the supplied beliefs")]
    InconsistentBeliefs,

    #[error("enumeration capacity exceeded: {candidates} candidate sequences (limit {limit})")]
    Capacity { candidates: f64, limit: f64 },

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("LP solver failure: {0}")]
    Solver(String),

    #[error("degenerate regressor: driver series is identically zero")]
    DegenerateRegressor,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("unknown network '{0}'")]
    UnknownNetwork(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Capacity and solver failures are operational rather than input errors.
    pub fn is_operational(&self) -> bool {
        matches!(
            self,
            Error::Capacity { .. } | Error::Solver(_) | Error::Overflow(_)
        )
    }
}
