use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("{what} = {value} is outside the admissible domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("quadrature did not reach tolerance (value {value:e}, error estimate {error:e})")]
    Quadrature { value: f64, error: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("singular element {element}: jacobian {jacobian:e}")]
    SingularElement { element: usize, jacobian: f64 },

    #[error("data violate the compatibility condition: defect {defect:e} (scale {scale:e})")]
    Compatibility { defect: f64, scale: f64 },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {:e})", .history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence {
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error(
        "added mass requested at epsilon = {epsilon:e}, outside tabulated range [{lo:e}, {hi:e}]"
    )]
    Extrapolation { epsilon: f64, lo: f64, hi: f64 },

    #[error("config error{}: {message}", .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, domain: impl Into<String>) -> Self {
        Error::Domain {
            what,
            value,
            domain: domain.into(),
        }
    }
}
