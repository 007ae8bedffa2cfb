use thiserror::Error;

fn shape(s: &(usize, usize)) -> String {
    format!("{}x{}", s.0, s.1)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {} and {}", shape(left), shape(right))]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("data of length {len} cannot fill a {rows}x{cols} matrix")]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("{op}: empty matrix")]
    Empty { op: &'static str },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantError {
    #[error("non-finite value {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    /// A gradient or update produced NaN/Inf. The harness reports this as
    /// divergence rather than as a failure.
    #[error("non-finite gradient in tensor {tensor} at ({row}, {col})")]
    NonFinite {
        tensor: usize,
        row: usize,
        col: usize,
    },
    #[error("expected {expected} tensors, got {got}")]
    TensorCount { expected: usize, got: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    InvalidValue {
        key: String,
        line: usize,
        message: String,
    },
    #[error("line {line}: malformed line, expected `key = value`")]
    Malformed { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { key: String, line: usize },
    #[error("`{key}`: {message}")]
    Constraint { key: String, message: String },
    #[error("configs differ outside the optimizer block: {keys}")]
    Incompatible { keys: String },
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}
