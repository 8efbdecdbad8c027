use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("relative density ratio is undefined for beta = 1 and rho = 0")]
    UndefinedRatio,

    #[error("{0} requires a non-empty input")]
    Empty(&'static str),

    #[error("negative deviation {0} passed to the threshold estimator")]
    NegativeDeviation(f64),

    #[error("step called on a finished episode")]
    EpisodeFinished,

    #[error("unknown environment `{0}` (expected one of: cartpole, pendulum-swingup, double-integrator)")]
    UnknownEnv(String),

    #[error("unknown method `{0}` (expected one of: ppo_clip, ppo_rb, rpe_fixed, rpe_adaptive)")]
    UnknownMethod(String),

    #[error("training diverged at update {update}: {what} is not finite")]
    Diverged { update: usize, what: &'static str },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            actual,
        })
    }
}
