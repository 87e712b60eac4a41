use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Two 3x3 convolutions, each followed by ReLU: `input -> mid -> output` channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvBlockSpec {
    pub input: usize,
    pub mid: usize,
    pub output: usize,
}

impl ConvBlockSpec {
    pub const fn new(input: usize, mid: usize, output: usize) -> Self {
        Self { input, mid, output }
    }
}

/// Channel plan of the autoencoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureSpec {
    pub encoder_blocks: Vec<ConvBlockSpec>,
    pub decoder_blocks: Vec<ConvBlockSpec>,
    /// `(input, output)` channels of the final 1x1 convolution.
    pub final_conv: (usize, usize),
    pub kernel: usize,
    pub feature_channels: usize,
}

/// Shape of one convolution layer in topological order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
}

pub const FEATURE_CHANNELS: usize = 48;
pub const ENCODER_BLOCKS: usize = 3;
pub const DECODER_BLOCKS: usize = 2;

impl Default for ArchitectureSpec {
    /// Encoder 1-16-16, 16-32-32, 32-48-48; decoder 48-32-32, 32-16-16; 1x1 conv 16-1.
    fn default() -> Self {
        Self {
            encoder_blocks: alloc::vec![
                ConvBlockSpec::new(1, 16, 16),
                ConvBlockSpec::new(16, 32, 32),
                ConvBlockSpec::new(32, 48, 48),
            ],
            decoder_blocks: alloc::vec![
                ConvBlockSpec::new(48, 32, 32),
                ConvBlockSpec::new(32, 16, 16)
            ],
            final_conv: (16, 1),
            kernel: 3,
            feature_channels: FEATURE_CHANNELS,
        }
    }
}

impl ArchitectureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.encoder_blocks.len() != ENCODER_BLOCKS
            || self.decoder_blocks.len() != DECODER_BLOCKS
        {
            return Err(Error::Model(format!(
                "expected {ENCODER_BLOCKS} encoder and {DECODER_BLOCKS} decoder blocks, got {} and {}",
                self.encoder_blocks.len(),
                self.decoder_blocks.len()
            )));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::Model(format!(
                "kernel size {} is not odd",
                self.kernel
            )));
        }
        if self.encoder_blocks[0].input != 1 || self.final_conv.1 != 1 {
            return Err(Error::Model(
                "network must map 1 channel to 1 channel".into(),
            ));
        }
        let shapes = self.layer_shapes();
        for pair in shapes.windows(2) {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(Error::Model(format!(
                    "channel chain broken: a layer outputs {} channels but the next expects {}",
                    pair[0].out_channels, pair[1].in_channels
                )));
            }
        }
        let enc_out = self.encoder_blocks[ENCODER_BLOCKS - 1].output;
        if enc_out != self.feature_channels {
            return Err(Error::Model(format!(
                "encoder emits {enc_out} channels but feature width is {}",
                self.feature_channels
            )));
        }
        Ok(())
    }

    /// Every convolution in forward order: encoder, decoder, final 1x1.
    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let mut out = Vec::new();
        for b in self.encoder_blocks.iter().chain(&self.decoder_blocks) {
            out.push(LayerShape {
                out_channels: b.mid,
                in_channels: b.input,
                kernel: self.kernel,
            });
            out.push(LayerShape {
                out_channels: b.output,
                in_channels: b.mid,
                kernel: self.kernel,
            });
        }
        out.push(LayerShape {
            out_channels: self.final_conv.1,
            in_channels: self.final_conv.0,
            kernel: 1,
        });
        out
    }

    pub fn encoder_layer_count(&self) -> usize {
        2 * self.encoder_blocks.len()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|s| s.out_channels * (s.in_channels * s.kernel * s.kernel + 1))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_is_consistent() {
        let spec = ArchitectureSpec::default();
        spec.validate().unwrap();
        let shapes = spec.layer_shapes();
        assert_eq!(shapes.len(), 11);
        assert_eq!(shapes[5].out_channels, 48);
        assert_eq!(
            shapes[10],
            LayerShape {
                out_channels: 1,
                in_channels: 16,
                kernel: 1
            }
        );
    }

    #[test]
    fn broken_chain_is_rejected() {
        let mut spec = ArchitectureSpec::default();
        spec.decoder_blocks[0].input = 40;
        assert!(matches!(spec.validate(), Err(Error::Model(_))));
        let mut spec = ArchitectureSpec::default();
        spec.encoder_blocks.pop();
        assert!(spec.validate().is_err());
    }
}
