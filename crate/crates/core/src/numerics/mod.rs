//! Tensor arithmetic needed to train the autoencoder: same-padded 2-d
//! convolution, ReLU/sigmoid, and the Adam optimizer, each with an explicit
//! backward pass.

mod activation;
mod adam;
mod conv;
mod gemm;

pub use activation::{relu_backward, relu_forward, sigmoid_backward, sigmoid_forward};
pub use adam::{adam_step, AdamHyper, AdamState};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvLayerParams};
