use alloc::format;
use alloc::vec::Vec;

use super::model::{decode, encode, ModelWeights};
use crate::error::{Error, Result};
use crate::fusion::{fuse_pyramids, FusionRuleConfig};
use crate::image::{crop, pad_symmetric, GrayImage};
use crate::tensor::{Matrix, Tensor};
use crate::wavelet::{wavedec2, waverec2, WaveletPyramid};

/// Smallest side `>= max(n, 8)` that is a multiple of `2^levels`.
pub fn padded_side(n: usize, levels: usize) -> usize {
    let step = 1usize << levels;
    n.max(8).div_ceil(step) * step
}

/// Decomposes every channel of a `[C,H,W]` feature tensor.
pub fn feature_pyramids(
    features: &Tensor,
    config: &FusionRuleConfig,
) -> Result<Vec<WaveletPyramid>> {
    let (c, h, w) = features.dims3()?;
    (0..c)
        .map(|k| {
            let m = Matrix::from_vec(h, w, features.channel(k).to_vec())?;
            wavedec2(&m, config.wavelet, config.levels, config.extension)
        })
        .collect()
}

/// Inverse of [`feature_pyramids`].
pub fn reconstruct_features(pyramids: &[WaveletPyramid]) -> Result<Tensor> {
    let first = pyramids
        .first()
        .ok_or_else(|| Error::Structure("no channels to reconstruct".into()))?;
    let (h, w) = first.original_dims();
    let mut data = Vec::with_capacity(pyramids.len() * h * w);
    for p in pyramids {
        let m = waverec2(p)?;
        if m.dims() != (h, w) {
            return Err(Error::Structure(format!(
                "channel reconstructs to {:?}, expected {:?}",
                m.dims(),
                (h, w)
            )));
        }
        data.extend_from_slice(m.data());
    }
    Tensor::from_vec(&[pyramids.len(), h, w], data)
}

fn check_pair(a: &GrayImage, b: &GrayImage) -> Result<()> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::Argument(format!(
            "source images differ in size: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

fn pad_features(t: &Tensor, rows: usize, cols: usize) -> Result<Tensor> {
    let (c, h, w) = t.dims3()?;
    if (h, w) == (rows, cols) {
        return Ok(t.clone());
    }
    let mut data = Vec::with_capacity(c * rows * cols);
    for k in 0..c {
        let m = Matrix::from_vec(h, w, t.channel(k).to_vec())?;
        data.extend_from_slice(pad_symmetric(&m, rows, cols).data());
    }
    Tensor::from_vec(&[c, rows, cols], data)
}

fn crop_features(t: &Tensor, rows: usize, cols: usize) -> Result<Tensor> {
    let (c, h, w) = t.dims3()?;
    if (h, w) == (rows, cols) {
        return Ok(t.clone());
    }
    let mut data = Vec::with_capacity(c * rows * cols);
    for k in 0..c {
        let m = Matrix::from_vec(h, w, t.channel(k).to_vec())?;
        data.extend_from_slice(crop(&m, rows, cols).data());
    }
    Tensor::from_vec(&[c, rows, cols], data)
}

fn to_image(decoded: &Tensor) -> Result<GrayImage> {
    let (_, h, w) = decoded.dims3()?;
    GrayImage::from_matrix_clamped(&Matrix::from_vec(h, w, decoded.data().to_vec())?)
}

/// Fuses two same-sized images: encode, per-channel DWT, coefficient fusion,
/// inverse DWT, decode. The feature maps are symmetrically padded for the
/// transform and cropped back before decoding; the output is clamped to `[0, 1]`.
pub fn fuse_images(
    a: &GrayImage,
    b: &GrayImage,
    weights: &ModelWeights,
    config: &FusionRuleConfig,
) -> Result<GrayImage> {
    config.validate()?;
    check_pair(a, b)?;
    let (h, w) = (a.height(), a.width());
    let rows = padded_side(h, config.levels);
    let cols = padded_side(w, config.levels);
    let fa = pad_features(&encode(&a.to_tensor(), weights)?, rows, cols)?;
    let fb = pad_features(&encode(&b.to_tensor(), weights)?, rows, cols)?;
    let pa = feature_pyramids(&fa, config)?;
    let pb = feature_pyramids(&fb, config)?;
    let fused = reconstruct_features(&fuse_pyramids(&pa, &pb, config)?)?;
    to_image(&decode(&crop_features(&fused, h, w)?, weights)?)
}

/// Fusion without the wavelet stage: the two feature maps are averaged.
pub fn fuse_images_baseline(
    a: &GrayImage,
    b: &GrayImage,
    weights: &ModelWeights,
) -> Result<GrayImage> {
    check_pair(a, b)?;
    let fa = encode(&a.to_tensor(), weights)?;
    let fb = encode(&b.to_tensor(), weights)?;
    let mut mean = fa;
    for (x, y) in mean.data_mut().iter_mut().zip(fb.data()) {
        *x = (*x + y) / 2.0;
    }
    to_image(&decode(&mean, weights)?)
}

/// `decode(encode(x))` as an image.
pub fn reconstruct(img: &GrayImage, weights: &ModelWeights) -> Result<GrayImage> {
    to_image(&decode(&encode(&img.to_tensor(), weights)?, weights)?)
}
