use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no loss terms")]
    NoLossTerms,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid block structure: {0}")]
    Blocks(String),
    #[error("invalid matrix: {0}")]
    Matrix(String),
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error("non-finite value at coordinate {0}")]
    NonFinite(usize),
    #[error("stale workspace: iterate modified since the residual was last synchronised")]
    StaleWorkspace,
    #[error("nil sampling")]
    NilSampling,
    #[error("invalid sampling: {0}")]
    Sampling(String),
    #[error("enumeration too large: n = {0} exceeds 20")]
    EnumerationTooLarge(usize),
    #[error("pair probabilities need at least two blocks")]
    SingleBlock,
    #[error("invalid ESO: {0}")]
    Eso(String),
    #[error("divergence: objective became non-finite at iteration {0} (step-size certificate too small?)")]
    Divergence(u64),
    #[error("invalid bound inputs: {0}")]
    Bound(String),
    #[error("generator: {0}")]
    Generator(String),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
