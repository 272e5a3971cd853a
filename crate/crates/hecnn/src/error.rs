use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// Mismatched ring parameters, moduli, shapes, or out-of-range arguments.
    #[error("parameter error: {0}")]
    Params(String),
    /// Operation called in a state that does not admit it (e.g. rescaling an
    /// already-rescaled polynomial, evaluating before initialization).
    #[error("state error: {0}")]
    State(String),
    /// A plaintext value does not fit the signed range of the active modulus.
    #[error("encoding error: {0}")]
    Encoding(String),
    /// Malformed wire frame: bad magic, version, or truncation.
    #[error("frame error: {0}")]
    Frame(String),
    /// Masked-ReLU nonce reused or unknown.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// Measured counters disagree with the closed-form prediction.
    #[error("reconciliation failure: {0}")]
    Reconcile(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
