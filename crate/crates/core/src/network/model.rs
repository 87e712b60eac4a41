use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::ArchitectureSpec;
use crate::error::{Error, Result};
use crate::numerics::{
    conv2d_backward, conv2d_forward, relu_backward, relu_forward, sigmoid_backward,
    sigmoid_forward, ConvLayerParams,
};
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;

/// All convolution parameters of the autoencoder plus its channel plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub spec: ArchitectureSpec,
    /// One entry per convolution, in forward order.
    pub layers: Vec<ConvLayerParams>,
    pub format_version: u32,
}

impl ModelWeights {
    /// Glorot-uniform kernels in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(spec: ArchitectureSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .layer_shapes()
            .iter()
            .map(|s| {
                let k2 = s.kernel * s.kernel;
                let bound = libm::sqrt(6.0 / ((s.in_channels * k2 + s.out_channels * k2) as f64));
                let n = s.out_channels * s.in_channels * k2;
                let kernels: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
                ConvLayerParams::new(
                    Tensor::from_vec(
                        &[s.out_channels, s.in_channels, s.kernel, s.kernel],
                        kernels,
                    )?,
                    Tensor::zeros(&[s.out_channels]),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec,
            layers,
            format_version: FORMAT_VERSION,
        })
    }

    /// All-zero parameters for the given plan.
    pub fn zeros(spec: ArchitectureSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_shapes()
            .iter()
            .map(|s| ConvLayerParams::zeros(s.out_channels, s.in_channels, s.kernel))
            .collect();
        Ok(Self {
            spec,
            layers,
            format_version: FORMAT_VERSION,
        })
    }

    /// Checks that every parameter tensor matches the architecture.
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let shapes = self.spec.layer_shapes();
        if shapes.len() != self.layers.len() {
            return Err(Error::Model(format!(
                "architecture has {} layers but {} parameter sets are present",
                shapes.len(),
                self.layers.len()
            )));
        }
        for (i, (s, p)) in shapes.iter().zip(&self.layers).enumerate() {
            let expect = [s.out_channels, s.in_channels, s.kernel, s.kernel];
            if p.kernels.shape() != expect || p.bias.shape() != [s.out_channels] {
                return Err(Error::Model(format!(
                    "layer {i}: kernels {:?} / bias {:?} do not match expected {expect:?}",
                    p.kernels.shape(),
                    p.bias.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    fn encoder_layers(&self) -> &[ConvLayerParams] {
        &self.layers[..self.spec.encoder_layer_count()]
    }

    fn decoder_layers(&self) -> &[ConvLayerParams] {
        &self.layers[self.spec.encoder_layer_count()..]
    }

    pub fn layer_name(&self, index: usize) -> alloc::string::String {
        let enc = self.spec.encoder_layer_count();
        if index < enc {
            format!("encoder.block{}.conv{}", index / 2, index % 2)
        } else if index + 1 < self.layers.len() {
            let d = index - enc;
            format!("decoder.block{}.conv{}", d / 2, d % 2)
        } else {
            "decoder.final".into()
        }
    }
}

fn check_channels(input: &Tensor, expected: usize, what: &'static str) -> Result<()> {
    let (c, _, _) = input
        .dims3()
        .map_err(|e| Error::Model(format!("{what}: {e}")))?;
    if c != expected {
        return Err(Error::Model(format!(
            "{what} expects {expected} input channels, got {c}"
        )));
    }
    Ok(())
}

/// Encoder: three ConvBlocks (conv, ReLU, conv, ReLU); `[1,H,W] -> [48,H,W]`.
pub fn encode(image: &Tensor, weights: &ModelWeights) -> Result<Tensor> {
    check_channels(image, 1, "encoder")?;
    let mut x = image.clone();
    for layer in weights.encoder_layers() {
        x = relu_forward(&conv2d_forward(&x, layer)?);
    }
    Ok(x)
}

/// Decoder: two ConvBlocks, a 1x1 convolution, and a sigmoid; `[48,H,W] -> [1,H,W]`.
pub fn decode(features: &Tensor, weights: &ModelWeights) -> Result<Tensor> {
    check_channels(features, weights.spec.feature_channels, "decoder")?;
    let dec = weights.decoder_layers();
    let (last, blocks) = dec
        .split_last()
        .ok_or_else(|| Error::Model("decoder has no layers".into()))?;
    let mut x = features.clone();
    for layer in blocks {
        x = relu_forward(&conv2d_forward(&x, layer)?);
    }
    Ok(sigmoid_forward(&conv2d_forward(&x, last)?))
}

/// Intermediate values retained by [`forward_train`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of each convolution.
    inputs: Vec<Tensor>,
    /// Pre-activation output of each convolution.
    pre: Vec<Tensor>,
    pub output: Tensor,
}

/// Full autoencoder pass `decode(encode(x))` keeping activations.
pub fn forward_train(image: &Tensor, weights: &ModelWeights) -> Result<ForwardCache> {
    check_channels(image, 1, "encoder")?;
    let n = weights.layers.len();
    let mut inputs = Vec::with_capacity(n);
    let mut pre = Vec::with_capacity(n);
    let mut x = image.clone();
    for (i, layer) in weights.layers.iter().enumerate() {
        let z = conv2d_forward(&x, layer)?;
        inputs.push(x);
        x = if i + 1 == n {
            sigmoid_forward(&z)
        } else {
            relu_forward(&z)
        };
        pre.push(z);
    }
    Ok(ForwardCache {
        inputs,
        pre,
        output: x,
    })
}

/// Parameter gradients for every layer, in forward order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGrads {
    pub kernels: Vec<Tensor>,
    pub bias: Vec<Tensor>,
}

impl WeightGrads {
    pub fn zeros_like(weights: &ModelWeights) -> Self {
        Self {
            kernels: weights
                .layers
                .iter()
                .map(|l| Tensor::zeros(l.kernels.shape()))
                .collect(),
            bias: weights
                .layers
                .iter()
                .map(|l| Tensor::zeros(l.bias.shape()))
                .collect(),
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &WeightGrads, scale: f64) {
        for (a, b) in self
            .kernels
            .iter_mut()
            .zip(&other.kernels)
            .chain(self.bias.iter_mut().zip(&other.bias))
        {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += scale * y;
            }
        }
    }
}

/// Backpropagates `grad_output` (gradient w.r.t. the sigmoid output) through the cached pass.
pub fn backward(
    cache: &ForwardCache,
    weights: &ModelWeights,
    grad_output: &Tensor,
) -> Result<WeightGrads> {
    let n = weights.layers.len();
    let mut grads = WeightGrads::zeros_like(weights);
    let mut g = sigmoid_backward(&cache.output, grad_output)?;
    for i in (0..n).rev() {
        if i + 1 < n {
            g = relu_backward(&cache.pre[i], &g)?;
        }
        let cg = conv2d_backward(&cache.inputs[i], &weights.layers[i], &g)?;
        grads.kernels[i] = cg.kernels;
        grads.bias[i] = cg.bias;
        g = cg.input;
    }
    Ok(grads)
}
