//! Comparison models: a dense-only network over the flattened slice and a
//! logistic regression over spectral and correlation features.

pub mod features;
pub mod fft;
pub mod logistic;

pub use features::{extract_features, pearson_pairs, FeatureVector, PearsonPairs, DEFAULT_BINS};
pub use fft::{fft_in_place, fft_magnitudes};
pub use logistic::{
    logistic_train, logistic_train_multinomial, FitOptions, LogisticParams, Standardizer,
};

use crate::error::Result;
use crate::nn::{Architecture, ModelParams};

/// Four dense layers (256/128/64 ReLU hidden units and a softmax output)
/// over an `input_channels × seq_len` slice.
pub fn mlp_build(
    input_channels: usize,
    seq_len: usize,
    num_categories: usize,
    seed: u64,
) -> Result<ModelParams> {
    ModelParams::init(Architecture::mlp(input_channels, seq_len, num_categories), seed)
}
