//! Unsupervised image fusion in the wavelet domain of learned feature maps.
//!
//! A small convolutional autoencoder is trained to reconstruct single
//! grayscale images. At fusion time each source image is encoded into 48
//! feature channels, every channel is decomposed with a multi-level 2-d DWT,
//! the two sets of coefficients are merged with a regional-energy rule, an
//! l1-norm activity rule, or their mean, and the fused feature maps are
//! reconstructed and decoded.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! image IO live in the `wavefuse` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod fusion;
pub mod image;
pub mod metrics;
pub mod network;
pub mod numerics;
pub mod ssim;
pub mod synth;
pub mod tensor;
pub mod wavelet;

pub use error::{Error, Result};
pub use tensor::{Matrix, Tensor};
