//! Structural similarity with a Gaussian window, evaluated at every valid
//! window position, and its gradient with respect to the first argument.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    /// Window side; shrunk to the largest odd size that fits smaller inputs.
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            data_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        let v = self.k1 * self.data_range;
        v * v
    }

    pub fn c2(&self) -> f64 {
        let v = self.k2 * self.data_range;
        v * v
    }

    /// Window side actually used for a `rows x cols` input.
    pub fn effective_window(&self, rows: usize, cols: usize) -> usize {
        let fit = rows.min(cols).min(self.window);
        if fit % 2 == 0 {
            fit - 1
        } else {
            fit
        }
    }
}

/// Normalized 1-d Gaussian of odd length `n`.
pub fn gaussian_1d(n: usize, sigma: f64) -> Vec<f64> {
    let c = (n / 2) as f64;
    let mut g: Vec<f64> = (0..n)
        .map(|i| {
            let d = i as f64 - c;
            libm::exp(-d * d / (2.0 * sigma * sigma))
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

/// Separable correlation keeping only positions where the window fits.
fn filter_valid(m: &Matrix, g: &[f64]) -> Matrix {
    let n = g.len();
    let (r, c) = m.dims();
    let (vr, vc) = (r + 1 - n, c + 1 - n);
    let mut tmp = Matrix::zeros(r, vc);
    for y in 0..r {
        let row = m.row(y);
        for x in 0..vc {
            let mut s = 0.0;
            for (k, w) in g.iter().enumerate() {
                s += w * row[x + k];
            }
            tmp.set(y, x, s);
        }
    }
    let mut out = Matrix::zeros(vr, vc);
    for y in 0..vr {
        for x in 0..vc {
            let mut s = 0.0;
            for (k, w) in g.iter().enumerate() {
                s += w * tmp.get(y + k, x);
            }
            out.set(y, x, s);
        }
    }
    out
}

/// Adjoint of [`filter_valid`]: spreads each valid-position value back over
/// its window onto a `rows x cols` grid.
fn filter_valid_adjoint(m: &Matrix, g: &[f64], rows: usize, cols: usize) -> Matrix {
    let n = g.len();
    let (vr, vc) = m.dims();
    let mut tmp = Matrix::zeros(rows, vc);
    for y in 0..vr {
        for x in 0..vc {
            let v = m.get(y, x);
            for (k, w) in g.iter().enumerate() {
                let idx = (y + k) * vc + x;
                tmp.data_mut()[idx] += w * v;
            }
        }
    }
    let mut out = Matrix::zeros(rows, cols);
    for y in 0..rows {
        for x in 0..vc {
            let v = tmp.get(y, x);
            for (k, w) in g.iter().enumerate() {
                out.data_mut()[y * cols + x + k] += w * v;
            }
        }
    }
    debug_assert_eq!(vr + n - 1, rows);
    out
}

/// Local statistics of one image pair at every valid window position.
struct LocalStats {
    mu_x: Matrix,
    mu_y: Matrix,
    sxx: Matrix,
    syy: Matrix,
    sxy: Matrix,
}

fn local_stats(x: &Matrix, y: &Matrix, g: &[f64]) -> LocalStats {
    LocalStats {
        mu_x: filter_valid(x, g),
        mu_y: filter_valid(y, g),
        sxx: filter_valid(&x.map(|v| v * v), g),
        syy: filter_valid(&y.map(|v| v * v), g),
        sxy: filter_valid(&x.zip_map(y, |a, b| a * b), g),
    }
}

fn check_pair(x: &Matrix, y: &Matrix, context: &'static str) -> Result<()> {
    if x.dims() != y.dims() {
        return Err(Error::Argument(format!(
            "{context}: {}x{} vs {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::Argument(format!("{context}: empty image")));
    }
    Ok(())
}

/// Mean SSIM and mean contrast-structure term over the valid window positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimComponents {
    pub ssim: f64,
    pub cs: f64,
}

pub fn ssim_components(x: &Matrix, y: &Matrix, params: &SsimParams) -> Result<SsimComponents> {
    check_pair(x, y, "ssim")?;
    let g = gaussian_1d(params.effective_window(x.rows(), x.cols()), params.sigma);
    let st = local_stats(x, y, &g);
    let (c1, c2) = (params.c1(), params.c2());
    let n = st.mu_x.data().len() as f64;
    let (mut s_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..st.mu_x.data().len() {
        let (mx, my) = (st.mu_x.data()[i], st.mu_y.data()[i]);
        let vx = st.sxx.data()[i] - mx * mx;
        let vy = st.syy.data()[i] - my * my;
        let cov = st.sxy.data()[i] - mx * my;
        let cs = (2.0 * cov + c2) / (vx + vy + c2);
        let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
        s_sum += l * cs;
        cs_sum += cs;
    }
    Ok(SsimComponents {
        ssim: s_sum / n,
        cs: cs_sum / n,
    })
}

/// Mean SSIM with the default parameters (11x11 Gaussian, sigma 1.5, data range 1).
pub fn ssim(x: &Matrix, y: &Matrix) -> Result<f64> {
    Ok(ssim_components(x, y, &SsimParams::default())?.ssim)
}

/// Mean SSIM and its gradient with respect to `x`.
pub fn ssim_with_grad(x: &Matrix, y: &Matrix, params: &SsimParams) -> Result<(f64, Matrix)> {
    check_pair(x, y, "ssim")?;
    let (rows, cols) = x.dims();
    let g = gaussian_1d(params.effective_window(rows, cols), params.sigma);
    let st = local_stats(x, y, &g);
    let (c1, c2) = (params.c1(), params.c2());
    let len = st.mu_x.data().len();
    let n = len as f64;
    let (vr, vc) = st.mu_x.dims();
    let mut d_mu = Matrix::zeros(vr, vc);
    let mut d_sxx = Matrix::zeros(vr, vc);
    let mut d_sxy = Matrix::zeros(vr, vc);
    let mut total = 0.0;
    for i in 0..len {
        let (mx, my) = (st.mu_x.data()[i], st.mu_y.data()[i]);
        let vx = st.sxx.data()[i] - mx * mx;
        let vy = st.syy.data()[i] - my * my;
        let cov = st.sxy.data()[i] - mx * my;
        let a = 2.0 * mx * my + c1;
        let b = 2.0 * cov + c2;
        let c = mx * mx + my * my + c1;
        let d = vx + vy + c2;
        let s = (a * b) / (c * d);
        total += s;
        d_mu.data_mut()[i] = s * (2.0 * my / a - 2.0 * my / b - 2.0 * mx / c + 2.0 * mx / d) / n;
        d_sxx.data_mut()[i] = -s / d / n;
        d_sxy.data_mut()[i] = 2.0 * s / b / n;
    }
    let t_mu = filter_valid_adjoint(&d_mu, &g, rows, cols);
    let t_xx = filter_valid_adjoint(&d_sxx, &g, rows, cols);
    let t_xy = filter_valid_adjoint(&d_sxy, &g, rows, cols);
    let mut grad = Matrix::zeros(rows, cols);
    for i in 0..rows * cols {
        grad.data_mut()[i] =
            t_mu.data()[i] + 2.0 * x.data()[i] * t_xx.data()[i] + y.data()[i] * t_xy.data()[i];
    }
    Ok((total / n, grad))
}

/// Standard five-scale MS-SSIM exponents.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

fn downsample2(m: &Matrix) -> Matrix {
    let (r, c) = (m.rows() / 2, m.cols() / 2);
    Matrix::from_fn(r, c, |y, x| {
        (m.get(2 * y, 2 * x)
            + m.get(2 * y, 2 * x + 1)
            + m.get(2 * y + 1, 2 * x)
            + m.get(2 * y + 1, 2 * x + 1))
            / 4.0
    })
}

/// Number of dyadic scales usable for an input whose shorter side is `min_dim`.
pub fn ms_ssim_scales(min_dim: usize, window: usize) -> usize {
    let mut scales = 1;
    let mut n = min_dim;
    while scales < MS_SSIM_WEIGHTS.len() && n / 2 >= window {
        n /= 2;
        scales += 1;
    }
    scales
}

/// Multi-scale SSIM over a 2x2-mean dyadic pyramid.
///
/// Uses up to five scales; when the input is too small for all five the
/// exponents of the scales used are renormalized to sum to one. Negative
/// per-scale terms are clamped to zero before exponentiation.
pub fn ms_ssim(x: &Matrix, y: &Matrix, params: &SsimParams) -> Result<f64> {
    check_pair(x, y, "ms_ssim")?;
    let scales = ms_ssim_scales(x.rows().min(x.cols()), params.window);
    let wsum: f64 = MS_SSIM_WEIGHTS[..scales].iter().sum();
    let mut xs = x.clone();
    let mut ys = y.clone();
    let mut result = 1.0;
    for (s, weight) in MS_SSIM_WEIGHTS[..scales].iter().enumerate() {
        let comp = ssim_components(&xs, &ys, params)?;
        let term = if s + 1 == scales { comp.ssim } else { comp.cs };
        result *= libm::pow(term.clamp(0.0, 1.0), weight / wsum);
        if s + 1 < scales {
            xs = downsample2(&xs);
            ys = downsample2(&ys);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.gen_range(0.0..1.0))
    }

    /// Direct 2-d sliding window, no separability.
    fn ssim_oracle(x: &Matrix, y: &Matrix) -> f64 {
        let p = SsimParams::default();
        let n = p.effective_window(x.rows(), x.cols());
        let g = gaussian_1d(n, p.sigma);
        let (c1, c2) = (p.c1(), p.c2());
        let mut total = 0.0;
        let mut count = 0.0;
        for oy in 0..=x.rows() - n {
            for ox in 0..=x.cols() - n {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let w = g[i] * g[j];
                        let a = x.get(oy + i, ox + j);
                        let b = y.get(oy + i, ox + j);
                        mx += w * a;
                        my += w * b;
                        sxx += w * a * a;
                        syy += w * b * b;
                        sxy += w * a * b;
                    }
                }
                let vx = sxx - mx * mx;
                let vy = syy - my * my;
                let cov = sxy - mx * my;
                total += (2.0 * mx * my + c1) * (2.0 * cov + c2)
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1.0;
            }
        }
        total / count
    }

    #[test]
    fn self_similarity_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x = random_matrix(&mut rng, 40, 37);
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(ms_ssim(&x, &x, &SsimParams::default()).unwrap(), 1.0);
    }

    #[test]
    fn constants_reduce_to_luminance_term() {
        let (c, d) = (0.3, 0.8);
        let p = SsimParams::default();
        let s = ssim(&Matrix::filled(16, 16, c), &Matrix::filled(16, 16, d)).unwrap();
        let expect = (2.0 * c * d + p.c1()) / (c * c + d * d + p.c1());
        assert!((s - expect).abs() < 1e-12);
    }

    #[test]
    fn matches_sliding_window_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &(r, c) in &[(20, 24), (11, 11), (7, 9)] {
            let x = random_matrix(&mut rng, r, c);
            let y = random_matrix(&mut rng, r, c);
            assert!((ssim(&x, &y).unwrap() - ssim_oracle(&x, &y)).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let x = random_matrix(&mut rng, 24, 24);
        let y = random_matrix(&mut rng, 24, 24);
        assert!((ssim(&x, &y).unwrap() - ssim(&y, &x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let p = SsimParams::default();
        let x = random_matrix(&mut rng, 14, 13);
        let y = random_matrix(&mut rng, 14, 13);
        let (_, grad) = ssim_with_grad(&x, &y, &p).unwrap();
        let h = 1e-5;
        for i in 0..x.data().len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            let fd = (ssim(&xp, &y).unwrap() - ssim(&xm, &y).unwrap()) / (2.0 * h);
            let a = grad.data()[i];
            assert!(
                (fd - a).abs() <= 1e-4 * (fd.abs() + a.abs()).max(1e-6),
                "i={i} fd={fd} a={a}"
            );
        }
    }

    #[test]
    fn ms_ssim_scale_counts() {
        assert_eq!(ms_ssim_scales(176, 11), 5);
        assert_eq!(ms_ssim_scales(175, 11), 4);
        assert_eq!(ms_ssim_scales(64, 11), 3);
        assert_eq!(ms_ssim_scales(8, 11), 1);
    }

    #[test]
    fn ms_ssim_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let x = random_matrix(&mut rng, 64, 64);
        let y = random_matrix(&mut rng, 64, 64);
        let v = ms_ssim(&x, &y, &SsimParams::default()).unwrap();
        assert!((0.0..=1.0).contains(&v));
        assert!(ms_ssim(&x, &Matrix::zeros(3, 3), &SsimParams::default()).is_err());
    }
}
