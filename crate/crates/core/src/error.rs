use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Too few points, or points without enough spread to fix a rotation.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("registration needs at least {required} correspondences, got {actual}")]
    InsufficientInput { required: usize, actual: usize },

    #[error("could not place object {object} at least {separation} apart from the others after {attempts} attempts")]
    SeparationInfeasible {
        object: usize,
        separation: f64,
        attempts: usize,
    },

    #[error("cannot aggregate scores over an empty dataset")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Malformed text input. `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}
