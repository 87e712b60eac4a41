use alloc::format;

use crate::error::{Error, Result};
use crate::ssim::{ssim_with_grad, SsimParams};
use crate::tensor::{Matrix, Tensor};

/// Loss terms of one reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    /// Mean squared error.
    pub pixel: f64,
    /// `1 - SSIM(output, input)`.
    pub ssim_loss: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.pixel.is_finite() && self.ssim_loss.is_finite()
    }

    pub(crate) fn accumulate(&mut self, other: &LossBreakdown, scale: f64) {
        self.total += scale * other.total;
        self.pixel += scale * other.pixel;
        self.ssim_loss += scale * other.ssim_loss;
    }
}

fn as_matrix(t: &Tensor, what: &str) -> Result<Matrix> {
    Matrix::try_from(t.clone()).map_err(|_| {
        Error::Argument(format!(
            "{what} must be [1,H,W] or [H,W], got {:?}",
            t.shape()
        ))
    })
}

/// `L = MSE(output, input) + lambda * (1 - SSIM(output, input))` and `dL/d output`.
pub fn loss(output: &Tensor, input: &Tensor, lambda: f64) -> Result<(LossBreakdown, Tensor)> {
    if output.shape() != input.shape() {
        return Err(Error::Argument(format!(
            "loss: output shape {:?} differs from input shape {:?}",
            output.shape(),
            input.shape()
        )));
    }
    let out = as_matrix(output, "output")?;
    let inp = as_matrix(input, "input")?;
    let n = out.data().len() as f64;
    let pixel = out
        .data()
        .iter()
        .zip(inp.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    let (s, ds) = ssim_with_grad(&out, &inp, &SsimParams::default())?;
    let ssim_loss = 1.0 - s;
    let grad: alloc::vec::Vec<f64> = out
        .data()
        .iter()
        .zip(inp.data())
        .zip(ds.data())
        .map(|((a, b), d)| 2.0 * (a - b) / n - lambda * d)
        .collect();
    let breakdown = LossBreakdown {
        total: pixel + lambda * ssim_loss,
        pixel,
        ssim_loss,
    };
    Ok((breakdown, Tensor::from_vec(output.shape(), grad)?))
}
