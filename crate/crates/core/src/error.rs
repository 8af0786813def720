use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} outside supported range 1..={max}", max = crate::qsim::MAX_QUBITS)]
    QubitCount(usize),

    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("CNOT control and target are both qubit {0}")]
    SameControlTarget(usize),

    #[error("probability {0} outside [0, 1]")]
    Probability(f64),

    #[error("Kraus operators are not complete (max deviation from identity {0:.3e})")]
    IncompleteKraus(f64),

    #[error("Kraus operator has dimension {got}, expected {expected}")]
    KrausShape { got: usize, expected: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parameter index {index} out of range (T = {len})")]
    ParameterIndex { index: usize, len: usize },

    #[error("feature map assigns feature {feature} but data has {dim} features")]
    MissingFeature { feature: usize, dim: usize },

    #[error("shot count must be at least 1")]
    Shots,

    #[error("gradients require exact expectations; disable shot sampling")]
    ShotsInGradient,

    #[error("degenerate kernel: sum of squared entries {0:.3e} is too small")]
    DegenerateKernel(f64),

    #[error("labels must be +1 or -1, got {0}")]
    Label(f64),

    #[error("labels are not balanced ({positive} positive, {negative} negative)")]
    Unbalanced { positive: usize, negative: usize },

    #[error("noise rate p = 1 makes the analytic gradient singular")]
    SingularNoise,

    #[error("ridge regularizer must be positive, got {0}")]
    Regularizer(f64),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("empty dataset: {0}")]
    Empty(&'static str),

    #[error("topology is not connected")]
    Disconnected,

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("missing message from neighbor {0}")]
    MissingMessage(usize),

    #[error("clipping threshold must be positive, got {0}")]
    Threshold(f64),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("CSV line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
