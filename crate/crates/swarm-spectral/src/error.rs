//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by topology construction, spectral computations,
/// classification, integration and the command line front end.
#[derive(Debug, Error)]
pub enum Error {
    /// A weight vector with fewer than two entries cannot describe a swarm.
    #[error("too few agents: a weight vector needs at least 2 entries, got {0}")]
    TooFewAgents(usize),

    /// Index `j` outside the valid range for the given agent count.
    #[error("index {index} out of range for n = {n} (valid: 0..{max})")]
    IndexOutOfRange { index: usize, n: usize, max: usize },

    /// Two objects that must share an agent count do not.
    #[error("size mismatch: {left} vs {right} agents")]
    SizeMismatch { left: usize, right: usize },

    /// The QR eigenvalue iteration did not converge within the sweep cap.
    #[error("qr_no_convergence: QR iteration exceeded {0} sweeps")]
    QrNoConvergence(usize),

    /// Operation defined only for non-negative weights.
    #[error("{op} requires non-negative weights (entry {index} = {value})")]
    NegativeWeights {
        op: &'static str,
        index: usize,
        value: f64,
    },

    /// Normalizer parameter outside its valid range.
    #[error("invalid normalizer parameter: epsilon = {0}, must be >= 1e-6")]
    InvalidEpsilon(f64),

    /// Integration produced a non-finite or absurdly large state.
    #[error("blowup: state left the trusted region at t = {t} (|coordinate| > {threshold:e})")]
    Blowup { t: f64, threshold: f64 },

    /// Invalid step or horizon for the integrator.
    #[error("invalid integration parameter: {0}")]
    InvalidIntegration(String),

    /// The initial configuration violates the viewing radius on some edges.
    #[error("invalid initial configuration: {count} edge(s) exceed radius {radius}; first: ({i},{j}) at distance {distance}")]
    InvalidInitialConfiguration {
        radius: f64,
        count: usize,
        i: usize,
        j: usize,
        distance: f64,
    },

    /// Bad command line or run configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
