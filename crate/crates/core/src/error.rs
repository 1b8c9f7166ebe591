use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParams { name: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("missing configuration key `{0}`")]
    MissingKey(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("temperature nonpositive ({value:e}) at grid point {index}")]
    TemperatureNonpositive { index: usize, value: f64 },

    #[error("derivative order {0} unsupported (at most 3)")]
    OrderUnsupported(usize),

    #[error("Bohm criterion violated (margin {0:.6e})")]
    BohmViolated(f64),

    #[error("phi = {phi:e} is beyond the sonic point of the density branch (H_min = {h_min:e})")]
    BranchExhausted { phi: f64, h_min: f64 },

    #[error("stationary profile is not monotone: {0}")]
    NonMonotone(String),

    #[error("fit window degenerate: {0}")]
    WindowDegenerate(String),

    #[error("trajectory too short: {0}")]
    WindowTooShort(String),

    #[error("Newton iteration diverged: residual {residual:e} after {iterations} iterations")]
    NewtonDiverged { residual: f64, iterations: usize },

    #[error("zero pivot in banded factorization at row {0}")]
    SingularPivot(usize),

    #[error("Poisson bounds violated at grid point {index}: sigma + phi~ = {value:e} outside [{lower:e}, {upper:e}]")]
    BoundsViolated {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("supersonic outflow lost at wall point {index} (margin {margin:e})")]
    SupersonicLost { index: usize, margin: f64 },

    #[error("positivity check failed: {0}")]
    PositivityFailed(String),

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Configuration problems map to exit code 2, everything else to 3.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams { .. }
                | Error::InvalidGrid(_)
                | Error::MissingKey(_)
                | Error::Config(_)
        )
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_config() {
            2
        } else {
            3
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
