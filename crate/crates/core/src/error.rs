use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("characteristic polynomial has a complex root pair (|Im| = {max_imag:.3e})")]
    ComplexRoots { max_imag: f64 },

    #[error("root polishing stalled at {root} (residual {residual:.3e})")]
    IllConditioned { root: f64, residual: f64 },

    #[error("characteristic roots are not separated: gap {gap:.3e} < {tol:.3e}")]
    RepeatedRealParts { gap: f64, tol: f64 },

    #[error("shifted root {value:.3e} is too close to zero for a dichotomy")]
    ZeroRoot { value: f64 },

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("tail integral did not converge before s = {s_max}")]
    TailNotConvergent { s_max: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("Picard iteration diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },

    #[error("Picard iteration hit max_iter = {iterations} (last delta {last_delta:.3e})")]
    MaxIter { iterations: usize, last_delta: f64 },

    #[error("geometric sequence has no limit: rho*A*varsigma = {ratio} >= 1")]
    NoLimit { ratio: f64 },

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Input errors map to exit code 2, everything else is numerical.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownIdentifier { .. }
                | Error::Parse { .. }
                | Error::Validation { .. }
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
