//! Layer primitives with forward and backward passes.

pub mod activation;
pub mod batchnorm;
pub mod block;
pub mod conv;
pub mod dense;
pub mod fold;
pub mod params;
pub mod pool;
pub mod softmax;

pub use activation::{relu_backward, relu_forward};
pub use batchnorm::{
    batchnorm_backward, batchnorm_forward, batchnorm_forward_infer, batchnorm_forward_train, BatchNormLayer,
    BatchStats, BnMode,
};
pub use block::{residual_block_forward, ConvBn, ConvBnCache, ConvBnGrads, ResidualBlock, ResidualCache, ResidualGrads};
pub use conv::{conv2d_backward, conv2d_forward, ConvLayer};
pub use dense::{dense_backward, dense_forward, DenseLayer};
pub use fold::{fold_batchnorm, FoldedConv};
pub use params::{count_params, CountParams, ParamMode};
pub use pool::{avg_pool2d, avg_pool2d_backward, global_avg_pool, global_avg_pool_backward};
pub use softmax::{argmax, cross_entropy, softmax, softmax_cross_entropy};
