//! Convolutional disengagement predictor: a 1-D convolution stack over the
//! call sequence with masked average pooling, a feed-forward static encoder,
//! and a batch-normalized feed-forward head with a logistic output.

mod network;
mod train;

pub use network::{
    masked_mean_pool, sigmoid, weighted_bce, BnStats, CondipArch, CondipBatch, CondipNetwork, CondipParams, Conv1d,
    DenseBn, ForwardCache, Gradients, Mode, ParamGroup,
};
pub use train::{condip_train, TrainConfig, TrainData, TrainReport};
