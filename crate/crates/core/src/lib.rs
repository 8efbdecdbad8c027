//! PPO-family policy objectives regularized by the relative Pearson
//! divergence, with an adaptive threshold, plus the small actor-critic
//! stack needed to train them on toy control tasks.

pub mod critic;
pub mod envs;
pub mod error;
pub mod net;
pub mod policy;
pub mod replay;
pub mod surrogate;
pub mod threshold;
pub mod trainer;

pub use error::{Error, Result};
