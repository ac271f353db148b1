use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("feeder is not radial: {0}")]
    NotRadial(String),

    #[error("bus `{0}` is not connected to the source")]
    Disconnected(String),

    #[error("unknown {kind} `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("invalid feeder: {0}")]
    InvalidModel(String),

    #[error("missing voltage base for region `{0}`")]
    MissingBase(String),

    #[error("regulator `{id}` tap {tap} outside [-16, 16]")]
    TapOutOfRange { id: String, tap: i32 },

    #[error("zero voltage magnitude at load `{0}`")]
    ZeroVoltage(String),

    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e})")]
    PowerFlowDiverged { iterations: usize, mismatch: f64 },

    #[error("voltage collapse at bus `{bus}` (|V| = {magnitude:.4} p.u.)")]
    VoltageCollapse { bus: String, magnitude: f64 },

    #[error("objective: {0}")]
    Objective(String),

    #[error("conic solver: {0}")]
    Solver(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
