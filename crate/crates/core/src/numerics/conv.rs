use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::gemm::gemm;
use crate::error::{dim_err, Error, Result};
use crate::tensor::Tensor;

/// Kernels `[out, in, k, k]` and bias `[out]` of one convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams {
    pub kernels: Tensor,
    pub bias: Tensor,
}

impl ConvLayerParams {
    pub fn new(kernels: Tensor, bias: Tensor) -> Result<Self> {
        let [o, _, kh, kw] = kernels.shape()[..] else {
            return Err(dim_err(
                "ConvLayerParams",
                "kernels [O,C,k,k]",
                format!("{:?}", kernels.shape()),
            ));
        };
        if kh != kw {
            return Err(dim_err(
                "ConvLayerParams",
                "square kernel",
                format!("{kh}x{kw}"),
            ));
        }
        if kh % 2 == 0 {
            return Err(Error::Argument(format!(
                "kernel size must be odd for same padding, got {kh}"
            )));
        }
        if bias.shape() != [o] {
            return Err(dim_err(
                "ConvLayerParams bias",
                format!("[{o}]"),
                format!("{:?}", bias.shape()),
            ));
        }
        Ok(Self { kernels, bias })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, k: usize) -> Self {
        Self {
            kernels: Tensor::zeros(&[out_channels, in_channels, k, k]),
            bias: Tensor::zeros(&[out_channels]),
        }
    }

    #[inline]
    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    #[inline]
    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    #[inline]
    pub fn kernel_size(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn param_count(&self) -> usize {
        self.kernels.len() + self.bias.len()
    }
}

/// Gradients returned by [`conv2d_backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernels: Tensor,
    pub bias: Tensor,
}

fn check_input(
    input: &Tensor,
    params: &ConvLayerParams,
    context: &'static str,
) -> Result<(usize, usize, usize)> {
    let (c, h, w) = input.dims3()?;
    if c != params.in_channels() {
        return Err(dim_err(
            context,
            format!("{} input channels (axis 0)", params.in_channels()),
            format!("{c} channels"),
        ));
    }
    if h == 0 || w == 0 {
        return Err(dim_err(
            context,
            "spatial dims >= 1 (axes 1,2)",
            format!("{h}x{w}"),
        ));
    }
    Ok((c, h, w))
}

/// Unfolds a zero-padded `[C,H,W]` input into a `[C*k*k, H*W]` patch matrix.
fn im2col(input: &[f64], c: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let pad = (k / 2) as isize;
    let hw = h * w;
    let mut cols = vec![0.0; c * k * k * hw];
    for ch in 0..c {
        let plane = &input[ch * hw..(ch + 1) * hw];
        for i in 0..k {
            for j in 0..k {
                let row = &mut cols[((ch * k + i) * k + j) * hw..][..hw];
                let dy = i as isize - pad;
                let dx = j as isize - pad;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    let sx_lo = (x_lo as isize + dx) as usize;
                    dst[x_lo..x_hi].copy_from_slice(&src[sx_lo..sx_lo + (x_hi - x_lo)]);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds patch gradients back onto the input grid.
fn col2im(cols: &[f64], c: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let pad = (k / 2) as isize;
    let hw = h * w;
    let mut out = vec![0.0; c * hw];
    for ch in 0..c {
        let plane = &mut out[ch * hw..(ch + 1) * hw];
        for i in 0..k {
            for j in 0..k {
                let row = &cols[((ch * k + i) * k + j) * hw..][..hw];
                let dy = i as isize - pad;
                let dx = j as isize - pad;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..][..w];
                    let dst = &mut plane[sy as usize * w..][..w];
                    let sx_lo = (x_lo as isize + dx) as usize;
                    for (d, s) in dst[sx_lo..sx_lo + (x_hi - x_lo)]
                        .iter_mut()
                        .zip(&src[x_lo..x_hi])
                    {
                        *d += *s;
                    }
                }
            }
        }
    }
    out
}

/// Stride-1 convolution (cross-correlation) with zero "same" padding.
///
/// `out[o,y,x] = bias[o] + sum_{c,i,j} kernel[o,c,i,j] * input_padded[c, y+i, x+j]`
pub fn conv2d_forward(input: &Tensor, params: &ConvLayerParams) -> Result<Tensor> {
    let (c, h, w) = check_input(input, params, "conv2d_forward")?;
    let o = params.out_channels();
    let k = params.kernel_size();
    let hw = h * w;
    let mut out = vec![0.0; o * hw];
    for (oc, bias) in params.bias.data().iter().enumerate() {
        out[oc * hw..(oc + 1) * hw].fill(*bias);
    }
    if k == 1 {
        gemm(
            o,
            c,
            hw,
            1.0,
            params.kernels.data(),
            false,
            input.data(),
            false,
            1.0,
            &mut out,
        );
    } else {
        let cols = im2col(input.data(), c, h, w, k);
        gemm(
            o,
            c * k * k,
            hw,
            1.0,
            params.kernels.data(),
            false,
            &cols,
            false,
            1.0,
            &mut out,
        );
    }
    Tensor::from_vec(&[o, h, w], out)
}

/// Exact gradients of `sum(grad_output * conv2d_forward(input, params))`.
pub fn conv2d_backward(
    input: &Tensor,
    params: &ConvLayerParams,
    grad_output: &Tensor,
) -> Result<ConvGrads> {
    let (c, h, w) = check_input(input, params, "conv2d_backward")?;
    let o = params.out_channels();
    let k = params.kernel_size();
    if grad_output.shape() != [o, h, w] {
        return Err(dim_err(
            "conv2d_backward grad_output",
            format!("[{o}, {h}, {w}]"),
            format!("{:?}", grad_output.shape()),
        ));
    }
    let hw = h * w;
    let g = grad_output.data();

    let bias_grad: Vec<f64> = (0..o)
        .map(|oc| g[oc * hw..(oc + 1) * hw].iter().sum())
        .collect();

    let ckk = c * k * k;
    let mut kernel_grad = vec![0.0; o * ckk];
    let input_grad = if k == 1 {
        gemm(
            o,
            hw,
            c,
            1.0,
            g,
            false,
            input.data(),
            true,
            0.0,
            &mut kernel_grad,
        );
        let mut gi = vec![0.0; c * hw];
        gemm(
            c,
            o,
            hw,
            1.0,
            params.kernels.data(),
            true,
            g,
            false,
            0.0,
            &mut gi,
        );
        gi
    } else {
        let cols = im2col(input.data(), c, h, w, k);
        gemm(
            o,
            hw,
            ckk,
            1.0,
            g,
            false,
            &cols,
            true,
            0.0,
            &mut kernel_grad,
        );
        let mut gcols = vec![0.0; ckk * hw];
        gemm(
            ckk,
            o,
            hw,
            1.0,
            params.kernels.data(),
            true,
            g,
            false,
            0.0,
            &mut gcols,
        );
        col2im(&gcols, c, h, w, k)
    };

    Ok(ConvGrads {
        input: Tensor::from_vec(&[c, h, w], input_grad)?,
        kernels: Tensor::from_vec(params.kernels.shape(), kernel_grad)?,
        bias: Tensor::from_vec(&[o], bias_grad)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_params(rng: &mut ChaCha8Rng, o: usize, c: usize, k: usize) -> ConvLayerParams {
        ConvLayerParams::new(random_tensor(rng, &[o, c, k, k]), random_tensor(rng, &[o])).unwrap()
    }

    /// Direct sextuple loop with explicit zero padding.
    fn reference_conv(input: &Tensor, p: &ConvLayerParams) -> Tensor {
        let (c, h, w) = input.dims3().unwrap();
        let (o, k) = (p.out_channels(), p.kernel_size());
        let pad = (k / 2) as isize;
        let kd = p.kernels.data();
        let mut out = Tensor::zeros(&[o, h, w]);
        for oc in 0..o {
            for y in 0..h {
                for x in 0..w {
                    let mut s = p.bias.data()[oc];
                    for ic in 0..c {
                        for i in 0..k {
                            for j in 0..k {
                                let sy = y as isize + i as isize - pad;
                                let sx = x as isize + j as isize - pad;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                s += kd[((oc * c + ic) * k + i) * k + j]
                                    * input.data()[(ic * h + sy as usize) * w + sx as usize];
                            }
                        }
                    }
                    out.data_mut()[(oc * h + y) * w + x] = s;
                }
            }
        }
        out
    }

    #[test]
    fn one_by_one_kernel_scales() {
        let input = Tensor::filled(&[1, 3, 3], 1.0);
        let p =
            ConvLayerParams::new(Tensor::filled(&[1, 1, 1, 1], 2.0), Tensor::zeros(&[1])).unwrap();
        let out = conv2d_forward(&input, &p).unwrap();
        assert_eq!(out.shape(), &[1, 3, 3]);
        assert!(out.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn centered_delta_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input = random_tensor(&mut rng, &[1, 6, 4]);
        let mut k = Tensor::zeros(&[1, 1, 3, 3]);
        k.data_mut()[4] = 1.0;
        let p = ConvLayerParams::new(k, Tensor::zeros(&[1])).unwrap();
        assert_eq!(conv2d_forward(&input, &p).unwrap(), input);
    }

    #[test]
    fn matches_direct_loop_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(c, o, k, h, w) in &[
            (2, 4, 3, 5, 5),
            (3, 2, 5, 4, 7),
            (2, 3, 1, 3, 2),
            (1, 2, 3, 1, 1),
        ] {
            let input = random_tensor(&mut rng, &[c, h, w]);
            let p = random_params(&mut rng, o, c, k);
            let fast = conv2d_forward(&input, &p).unwrap();
            let slow = reference_conv(&input, &p);
            assert!(fast.max_abs_diff(&slow) < 1e-12, "c={c} o={o} k={k}");
        }
    }

    #[test]
    fn rejects_channel_mismatch_and_even_kernels() {
        let p = ConvLayerParams::zeros(2, 3, 3);
        let err = conv2d_forward(&Tensor::zeros(&[2, 4, 4]), &p).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        assert!(ConvLayerParams::new(Tensor::zeros(&[1, 1, 2, 2]), Tensor::zeros(&[1])).is_err());
        let bad_grad = Tensor::zeros(&[2, 4, 5]);
        assert!(conv2d_backward(&Tensor::zeros(&[3, 4, 4]), &p, &bad_grad).is_err());
    }

    #[test]
    fn linear_in_input_without_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = random_params(&mut rng, 3, 2, 3);
        p.bias = Tensor::zeros(&[3]);
        let x = random_tensor(&mut rng, &[2, 6, 5]);
        let y = random_tensor(&mut rng, &[2, 6, 5]);
        let (a, b) = (0.7, -1.3);
        let combo = Tensor::from_vec(
            &[2, 6, 5],
            x.data()
                .iter()
                .zip(y.data())
                .map(|(u, v)| a * u + b * v)
                .collect(),
        )
        .unwrap();
        let lhs = conv2d_forward(&combo, &p).unwrap();
        let cx = conv2d_forward(&x, &p).unwrap();
        let cy = conv2d_forward(&y, &p).unwrap();
        for i in 0..lhs.len() {
            assert!((lhs.data()[i] - (a * cx.data()[i] + b * cy.data()[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_params(&mut rng, 2, 2, 3);
        let x = random_tensor(&mut rng, &[2, 4, 4]);
        let g = conv2d_backward(&x, &p, &Tensor::zeros(&[2, 4, 4])).unwrap();
        assert!(g
            .input
            .data()
            .iter()
            .chain(g.kernels.data())
            .chain(g.bias.data())
            .all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        let (x, w, g) = (1.5, -0.25, 3.0);
        let p =
            ConvLayerParams::new(Tensor::filled(&[1, 1, 1, 1], w), Tensor::zeros(&[1])).unwrap();
        let grads = conv2d_backward(
            &Tensor::filled(&[1, 1, 1], x),
            &p,
            &Tensor::filled(&[1, 1, 1], g),
        )
        .unwrap();
        assert_eq!(grads.input.data(), &[w * g]);
        assert_eq!(grads.kernels.data(), &[x * g]);
        assert_eq!(grads.bias.data(), &[g]);
    }

    fn objective(x: &Tensor, p: &ConvLayerParams, g: &Tensor) -> f64 {
        let out = conv2d_forward(x, p).unwrap();
        out.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
    }

    #[test]
    fn backward_matches_central_differences() {
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(c, o, k, hh, ww) in &[(2, 2, 3, 4, 4), (1, 3, 3, 5, 3), (3, 2, 1, 3, 3)] {
            let x = random_tensor(&mut rng, &[c, hh, ww]);
            let p = random_params(&mut rng, o, c, k);
            let g = random_tensor(&mut rng, &[o, hh, ww]);
            let grads = conv2d_backward(&x, &p, &g).unwrap();
            for i in 0..x.len() {
                let mut xp = x.clone();
                xp.data_mut()[i] += h;
                let mut xm = x.clone();
                xm.data_mut()[i] -= h;
                let fd = (objective(&xp, &p, &g) - objective(&xm, &p, &g)) / (2.0 * h);
                assert!(rel_err(fd, grads.input.data()[i]) < 1e-4);
            }
            for i in 0..p.kernels.len() {
                let mut pp = p.clone();
                pp.kernels.data_mut()[i] += h;
                let mut pm = p.clone();
                pm.kernels.data_mut()[i] -= h;
                let fd = (objective(&x, &pp, &g) - objective(&x, &pm, &g)) / (2.0 * h);
                assert!(rel_err(fd, grads.kernels.data()[i]) < 1e-4);
            }
            for i in 0..o {
                let mut pp = p.clone();
                pp.bias.data_mut()[i] += h;
                let mut pm = p.clone();
                pm.bias.data_mut()[i] -= h;
                let fd = (objective(&x, &pp, &g) - objective(&x, &pm, &g)) / (2.0 * h);
                assert!(rel_err(fd, grads.bias.data()[i]) < 1e-4);
            }
        }
    }
}
