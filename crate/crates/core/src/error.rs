use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("operation not supported for game kind {kind}: {what}")]
    UnsupportedKind { kind: &'static str, what: &'static str },

    #[error("population is empty")]
    EmptyPopulation,

    #[error("meta-distribution is not on the simplex (sum {sum}, min {min})")]
    NotSimplex { sum: f64, min: f64 },

    #[error("inner best response did not reach stationarity: gradient norm {norm:e} > {threshold:e}")]
    NotStationary { norm: f64, threshold: f64 },

    #[error("best-response Hessian is ill-conditioned (condition estimate {condition:e}); raise the regulariser")]
    IllConditioned { condition: f64 },

    #[error("meta-gradient norm {norm:e} exceeded the hard ceiling {ceiling:e}")]
    GradientExplosion { norm: f64, ceiling: f64 },

    #[error("malformed payoff matrix: {0}")]
    Matrix(String),

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by numerics at run time rather than by inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NotStationary { .. }
                | Error::IllConditioned { .. }
                | Error::GradientExplosion { .. }
        )
    }
}

pub(crate) fn ensure_finite(values: &[f64], context: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

pub(crate) fn ensure_len(expected: usize, got: usize, context: &'static str) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected,
            got,
            context,
        })
    }
}
