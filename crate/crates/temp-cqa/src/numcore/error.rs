use thiserror::Error;

/// Errors raised by tensor arithmetic, the tape, and the parameter store.
#[derive(Debug, Error)]
pub enum NumError {
    #[error("shape mismatch in `{op}`: left is {lhs:?}, right is {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("`{op}` expects a scalar (1x1), got {shape:?}")]
    NotScalar {
        op: &'static str,
        shape: (usize, usize),
    },

    #[error("`{op}` requires a nonempty operand list")]
    EmptyList { op: &'static str },

    #[error("backward called without a recorded forward computation")]
    NoForwardRecorded,

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),

    #[error("checkpoint {path}: {source}")]
    CheckpointIo {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint manifest {path}: {reason}")]
    CheckpointFormat { path: String, reason: String },
}

pub type NumResult<T> = Result<T, NumError>;
