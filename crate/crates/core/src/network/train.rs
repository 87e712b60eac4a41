use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::ArchitectureSpec;
use super::loss::{loss, LossBreakdown};
use super::model::{backward, forward_train, ModelWeights, WeightGrads};
use crate::error::{Error, Result};
use crate::numerics::{AdamHyper, AdamState};
use crate::tensor::Tensor;

/// Hyperparameters of self-reconstruction training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda_ssim: f64,
    pub seed: u64,
    /// Side length images are resized to before training.
    pub image_size: usize,
    /// Stops after this many optimizer steps, possibly mid-epoch.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 16,
            epochs: 100,
            lambda_ssim: 1000.0,
            seed: 0,
            image_size: 256,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Argument(format!(
                "batch_size and epochs must be at least 1, got {} and {}",
                self.batch_size, self.epochs
            )));
        }
        if !(self.lambda_ssim >= 0.0) || !self.lambda_ssim.is_finite() {
            return Err(Error::Argument(format!(
                "lambda_ssim must be finite and >= 0, got {}",
                self.lambda_ssim
            )));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Argument(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.image_size == 0 {
            return Err(Error::Argument("image_size must be positive".into()));
        }
        Ok(())
    }

    fn hyper(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.learning_rate,
            ..AdamHyper::default()
        }
    }
}

/// Mean loss over the images seen in one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub loss: LossBreakdown,
}

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub weights: ModelWeights,
    pub history: Vec<EpochRecord>,
    pub steps: usize,
}

struct Optimizer {
    kernels: Vec<AdamState>,
    bias: Vec<AdamState>,
}

impl Optimizer {
    fn new(weights: &ModelWeights, hyper: AdamHyper) -> Self {
        let make = |suffix: &str,
                    pick: fn(&crate::numerics::ConvLayerParams) -> &Tensor|
         -> Vec<AdamState> {
            weights
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    AdamState::new(
                        format!("{}.{suffix}", weights.layer_name(i)),
                        pick(l).shape(),
                        hyper,
                    )
                })
                .collect()
        };
        Self {
            kernels: make("kernels", |l| &l.kernels),
            bias: make("bias", |l| &l.bias),
        }
    }

    fn step(&mut self, weights: &mut ModelWeights, grads: &WeightGrads) -> Result<()> {
        for (i, layer) in weights.layers.iter_mut().enumerate() {
            self.kernels[i].update(&mut layer.kernels, &grads.kernels[i])?;
            self.bias[i].update(&mut layer.bias, &grads.bias[i])?;
        }
        Ok(())
    }
}

fn check_images(images: &[Tensor], batch: usize) -> Result<()> {
    if images.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if images.len() < batch {
        return Err(Error::Data(format!(
            "training set has {} images but the batch size is {batch}",
            images.len()
        )));
    }
    for (i, img) in images.iter().enumerate() {
        let (c, h, w) = img
            .dims3()
            .map_err(|_| Error::Data(format!("image {i} is not a [1,H,W] tensor")))?;
        if c != 1 || h == 0 || w == 0 {
            return Err(Error::Data(format!(
                "image {i} has shape {:?}, expected [1,H,W]",
                img.shape()
            )));
        }
        if !img.is_finite() {
            return Err(Error::Data(format!("image {i} contains non-finite pixels")));
        }
    }
    Ok(())
}

/// Loss and batch-averaged parameter gradients for one mini-batch.
pub fn batch_gradients(
    weights: &ModelWeights,
    batch: &[&Tensor],
    lambda: f64,
) -> Result<(LossBreakdown, WeightGrads)> {
    let mut grads = WeightGrads::zeros_like(weights);
    let mut total = LossBreakdown::default();
    let scale = 1.0 / batch.len() as f64;
    for img in batch {
        let cache = forward_train(img, weights)?;
        let (l, g_out) = loss(&cache.output, img, lambda)?;
        let g = backward(&cache, weights, &g_out)?;
        grads.add_scaled(&g, scale);
        total.accumulate(&l, scale);
    }
    Ok((total, grads))
}

/// Self-reconstruction training of a freshly initialized default autoencoder.
pub fn train(images: &[Tensor], config: &TrainConfig) -> Result<TrainOutcome> {
    let weights = ModelWeights::init(ArchitectureSpec::default(), config.seed)?;
    train_from(weights, images, config, |_| {})
}

/// Trains `weights` in place on `images`; `on_epoch` sees each finished epoch.
///
/// Each epoch visits the images in a fresh seeded permutation; the last batch
/// of an epoch may be smaller than `batch_size`.
pub fn train_from(
    mut weights: ModelWeights,
    images: &[Tensor],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    weights.validate()?;
    check_images(images, config.batch_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut opt = Optimizer::new(&weights, config.hyper());
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut history = Vec::new();
    let mut steps = 0usize;
    let limit = config.max_steps.unwrap_or(usize::MAX);
    'epochs: for epoch in 0..config.epochs {
        if steps >= limit {
            break;
        }
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        let mut seen = 0usize;
        let mut epoch_steps = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Tensor> = chunk.iter().map(|&i| &images[i]).collect();
            let (l, grads) = batch_gradients(&weights, &batch, config.lambda_ssim)?;
            if !l.is_finite() {
                return Err(Error::TrainingAborted {
                    epoch,
                    step: steps,
                    reason: format!("non-finite loss {l:?}"),
                });
            }
            opt.step(&mut weights, &grads)
                .map_err(|e| Error::TrainingAborted {
                    epoch,
                    step: steps,
                    reason: format!("{e}"),
                })?;
            sum.accumulate(&l, batch.len() as f64);
            seen += batch.len();
            steps += 1;
            epoch_steps += 1;
            if steps >= limit {
                let rec = finish_epoch(epoch, epoch_steps, sum, seen);
                on_epoch(&rec);
                history.push(rec);
                break 'epochs;
            }
        }
        let rec = finish_epoch(epoch, epoch_steps, sum, seen);
        on_epoch(&rec);
        history.push(rec);
    }
    Ok(TrainOutcome {
        weights,
        history,
        steps,
    })
}

fn finish_epoch(epoch: usize, steps: usize, mut sum: LossBreakdown, seen: usize) -> EpochRecord {
    let inv = 1.0 / seen as f64;
    sum = LossBreakdown {
        total: sum.total * inv,
        pixel: sum.pixel * inv,
        ssim_loss: sum.ssim_loss * inv,
    };
    EpochRecord {
        epoch,
        steps,
        loss: sum,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::arch::ConvBlockSpec;
    use rand::Rng;

    fn tiny_spec() -> ArchitectureSpec {
        ArchitectureSpec {
            encoder_blocks: alloc::vec![
                ConvBlockSpec::new(1, 2, 2),
                ConvBlockSpec::new(2, 2, 2),
                ConvBlockSpec::new(2, 3, 3)
            ],
            decoder_blocks: alloc::vec![ConvBlockSpec::new(3, 2, 2), ConvBlockSpec::new(2, 2, 2)],
            final_conv: (2, 1),
            kernel: 3,
            feature_channels: 3,
        }
    }

    fn images(n: usize, seed: u64) -> Vec<Tensor> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Tensor::from_vec(
                    &[1, 12, 12],
                    (0..144).map(|_| rng.gen_range(0.0..1.0)).collect(),
                )
                .unwrap()
            })
            .collect()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 2,
            epochs: 3,
            image_size: 12,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let w = ModelWeights::init(tiny_spec(), 4).unwrap();
        let c = TrainConfig {
            learning_rate: 0.0,
            batch_size: 1,
            epochs: 1,
            ..cfg()
        };
        let out = train_from(w.clone(), &images(1, 1), &c, |_| {}).unwrap();
        assert_eq!(out.weights, w);
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let imgs = images(5, 2);
        let w = ModelWeights::init(tiny_spec(), 4).unwrap();
        let a = train_from(w.clone(), &imgs, &cfg(), |_| {}).unwrap();
        let b = train_from(w, &imgs, &cfg(), |_| {}).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 3);
        assert_eq!(a.steps, 9);
    }

    #[test]
    fn max_steps_truncates_mid_epoch() {
        let w = ModelWeights::init(tiny_spec(), 4).unwrap();
        let c = TrainConfig {
            max_steps: Some(4),
            ..cfg()
        };
        let out = train_from(w, &images(5, 3), &c, |_| {}).unwrap();
        assert_eq!(out.steps, 4);
        assert_eq!(out.history.len(), 2);
        assert_eq!(out.history[1].steps, 1);
    }

    #[test]
    fn data_and_config_errors() {
        let w = ModelWeights::init(tiny_spec(), 4).unwrap();
        assert!(matches!(
            train_from(w.clone(), &[], &cfg(), |_| {}),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            train_from(w.clone(), &images(1, 1), &cfg(), |_| {}),
            Err(Error::Data(_))
        ));
        let bad = TrainConfig {
            batch_size: 0,
            ..cfg()
        };
        assert!(matches!(
            train_from(w.clone(), &images(2, 1), &bad, |_| {}),
            Err(Error::Argument(_))
        ));
        let bad = TrainConfig {
            lambda_ssim: -1.0,
            ..cfg()
        };
        assert!(matches!(
            train_from(w, &images(2, 1), &bad, |_| {}),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn non_finite_pixels_are_data_errors() {
        let w = ModelWeights::init(tiny_spec(), 4).unwrap();
        let mut imgs = images(2, 1);
        imgs[0].data_mut()[0] = f64::NAN;
        let err = train_from(w, &imgs, &cfg(), |_| {}).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn non_finite_loss_aborts_with_position() {
        let mut w = ModelWeights::init(tiny_spec(), 4).unwrap();
        w.layers[3].bias.data_mut()[0] = f64::INFINITY;
        let err = train_from(w, &images(4, 1), &cfg(), |_| {}).unwrap_err();
        assert!(
            matches!(
                err,
                Error::TrainingAborted {
                    epoch: 0,
                    step: 0,
                    ..
                }
            ),
            "{err:?}"
        );
    }
}
