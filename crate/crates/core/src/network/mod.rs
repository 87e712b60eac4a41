//! Convolutional autoencoder, its training loop and the fusion pipeline.

mod arch;
mod loss;
mod model;
mod pipeline;
mod train;

pub use arch::{
    ArchitectureSpec, ConvBlockSpec, LayerShape, DECODER_BLOCKS, ENCODER_BLOCKS, FEATURE_CHANNELS,
};
pub use loss::{loss, LossBreakdown};
pub use model::{
    backward, decode, encode, forward_train, ForwardCache, ModelWeights, WeightGrads,
    FORMAT_VERSION,
};
pub use pipeline::{
    feature_pyramids, fuse_images, fuse_images_baseline, padded_side, reconstruct,
    reconstruct_features,
};
pub use train::{batch_gradients, train, train_from, EpochRecord, TrainConfig, TrainOutcome};
