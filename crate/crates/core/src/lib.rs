//! Ordinal pain-score classification for multichannel physiological
//! recordings: recording I/O, a from-scratch CNN with a distance-weighted
//! ordinal loss, slice-based training, majority-vote consensus over slices,
//! feature-based baselines and a synthetic data generator.

pub mod baselines;
pub mod consensus;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod nn;
pub mod ordinal;
pub mod signal_store;
pub mod synthgen;
pub mod trainer;

pub use error::{Error, Result};
