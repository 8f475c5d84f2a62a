//! From-scratch neural-network kernels, the model family built on them,
//! the Adam optimizer and model checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod grid;
pub mod model;
pub mod ops;

pub use adam::{adam_step, AdamState};
pub use grid::Grid2D;
pub use model::{
    model_backward, model_forward, Architecture, BatchTrace, ConvLayerSpec, ForwardOptions,
    Gradient, ModelParams, ParamLayout,
};
pub use ops::{
    batchnorm_backward, batchnorm_forward, conv_backward, conv_forward, dense_backward,
    dense_forward, dropout, dropout_mask, global_max_pool, local_max_pool, local_max_pool_indexed,
    softmax, Activation, BatchNormOutput, ConvFilter, MaxPick, Mode, Pooled, ProbVector,
    RunningStats,
};
