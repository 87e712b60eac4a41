//! Coefficient fusion rules applied to per-channel wavelet pyramids.
//!
//! * regional: the approximation band is merged by a regional-energy
//!   match/select rule, each detail band by whole-band variance selection.
//! * l1norm: every band is merged with weights derived from the l1 norm of
//!   the coefficients across all feature channels.
//! * combined: band-wise mean of the two results above.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Matrix;
use crate::wavelet::{Extension, Wavelet, WaveletPyramid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FusionRule {
    Regional,
    L1Norm,
    Combined,
}

impl FusionRule {
    pub const ALL: [FusionRule; 3] = [
        FusionRule::Regional,
        FusionRule::L1Norm,
        FusionRule::Combined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionRule::Regional => "regional",
            FusionRule::L1Norm => "l1",
            FusionRule::Combined => "combined",
        }
    }
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regional" => Ok(FusionRule::Regional),
            "l1" | "l1norm" => Ok(FusionRule::L1Norm),
            "combined" => Ok(FusionRule::Combined),
            _ => Err(Error::Argument(format!(
                "unknown fusion rule '{s}', expected regional, l1 or combined"
            ))),
        }
    }
}

/// How the regional and l1-norm results are joined under [`FusionRule::Combined`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CombineMode {
    #[default]
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionRuleConfig {
    pub rule: FusionRule,
    /// Side of the regional-energy window; odd.
    pub window: usize,
    /// Matching-degree threshold `T` in (0, 1).
    pub match_threshold: f64,
    /// Activity averaging radius of the l1-norm rule.
    pub block_radius: usize,
    pub combine: CombineMode,
    pub levels: usize,
    pub wavelet: Wavelet,
    pub extension: Extension,
}

impl Default for FusionRuleConfig {
    fn default() -> Self {
        Self {
            rule: FusionRule::Combined,
            window: 3,
            match_threshold: 0.6,
            block_radius: 1,
            combine: CombineMode::Mean,
            levels: 2,
            wavelet: Wavelet::Db1,
            extension: Extension::Symmetric,
        }
    }
}

impl FusionRuleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::Argument(format!(
                "regional window must be odd and positive, got {}",
                self.window
            )));
        }
        if !(self.match_threshold > 0.0 && self.match_threshold < 1.0) {
            return Err(Error::Argument(format!(
                "match threshold must lie in (0, 1), got {}",
                self.match_threshold
            )));
        }
        if self.levels == 0 {
            return Err(Error::Argument("levels must be >= 1".into()));
        }
        Ok(())
    }
}

/// Normalized separable binomial window of side `window`; for 3 this is
/// `[[1,2,1],[2,4,2],[1,2,1]] / 16`.
pub fn window_weights(window: usize) -> Result<Vec<f64>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::Argument(format!(
            "window must be odd and positive, got {window}"
        )));
    }
    let mut row = vec![1.0f64];
    for _ in 1..window {
        let mut next = vec![1.0; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    let total: f64 = row.iter().sum::<f64>() * row.iter().sum::<f64>();
    let mut w = Vec::with_capacity(window * window);
    for a in &row {
        for b in &row {
            w.push(a * b / total);
        }
    }
    Ok(w)
}

/// Window-weighted sum of `f(a, b)` around every location, edges replicated.
fn windowed(
    a: &Matrix,
    b: &Matrix,
    weights: &[f64],
    window: usize,
    f: impl Fn(f64, f64) -> f64,
) -> Matrix {
    let (rows, cols) = a.dims();
    let half = (window / 2) as isize;
    Matrix::from_fn(rows, cols, |y, x| {
        let mut s = 0.0;
        for i in 0..window {
            for j in 0..window {
                let yy = y as isize + i as isize - half;
                let xx = x as isize + j as isize - half;
                s += weights[i * window + j] * f(a.get_clamped(yy, xx), b.get_clamped(yy, xx));
            }
        }
        s
    })
}

/// `E[y,x] = sum w[i,j] * C[y+i, x+j]^2` over the window, edges replicated.
pub fn regional_energy(coeffs: &Matrix, window: usize) -> Result<Matrix> {
    let w = window_weights(window)?;
    Ok(windowed(coeffs, coeffs, &w, window, |a, _| a * a))
}

/// Regional-energy rule for approximation bands.
///
/// With matching degree `M = 2 sum(w C1 C2) / (E1 + E2)`: below the
/// threshold the higher-energy coefficient is selected, otherwise the two
/// are averaged with `w_major = 1/2 + 1/2 (1 - M) / (1 - T)` on the
/// higher-energy side.
pub fn fuse_low_regional(l1: &Matrix, l2: &Matrix, config: &FusionRuleConfig) -> Result<Matrix> {
    l1.ensure_same_dims(l2, "fuse_low_regional")
        .map_err(|e| Error::Argument(format!("{e}")))?;
    config.validate()?;
    let w = window_weights(config.window)?;
    let e1 = windowed(l1, l1, &w, config.window, |a, _| a * a);
    let e2 = windowed(l2, l2, &w, config.window, |a, _| a * a);
    let cross = windowed(l1, l2, &w, config.window, |a, b| a * b);
    let t = config.match_threshold;
    let mut out = Matrix::zeros(l1.rows(), l1.cols());
    for i in 0..out.data().len() {
        let (c1, c2) = (l1.data()[i], l2.data()[i]);
        let (en1, en2) = (e1.data()[i], e2.data()[i]);
        let denom = en1 + en2;
        let m = if denom == 0.0 {
            0.0
        } else {
            (2.0 * cross.data()[i] / denom).min(1.0)
        };
        let (major, minor) = if en1 >= en2 { (c1, c2) } else { (c2, c1) };
        out.data_mut()[i] = if m < t {
            major
        } else {
            let w_major = 0.5 + 0.5 * (1.0 - m) / (1.0 - t);
            w_major * major + (1.0 - w_major) * minor
        };
    }
    Ok(out)
}

/// Population variance of all entries.
pub fn band_variance(m: &Matrix) -> f64 {
    let n = m.data().len() as f64;
    let mean = m.data().iter().sum::<f64>() / n;
    m.data()
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n
}

/// Selects the whole detail band with strictly larger variance; ties give
/// the elementwise mean.
pub fn fuse_high_variance(h1: &Matrix, h2: &Matrix) -> Result<Matrix> {
    h1.ensure_same_dims(h2, "fuse_high_variance")
        .map_err(|e| Error::Argument(format!("{e}")))?;
    let (v1, v2) = (band_variance(h1), band_variance(h2));
    Ok(if v1 > v2 {
        h1.clone()
    } else if v2 > v1 {
        h2.clone()
    } else {
        h1.zip_map(h2, |a, b| (a + b) / 2.0)
    })
}

/// Per-location l1-norm weights `(w1, w2)` for one band across a channel stack.
pub fn l1norm_weights(
    bands1: &[&Matrix],
    bands2: &[&Matrix],
    radius: usize,
) -> Result<(Matrix, Matrix)> {
    if bands1.is_empty() || bands1.len() != bands2.len() {
        return Err(Error::Argument(format!(
            "l1-norm rule needs equal non-empty channel stacks, got {} and {}",
            bands1.len(),
            bands2.len()
        )));
    }
    let dims = bands1[0].dims();
    if bands1.iter().chain(bands2).any(|b| b.dims() != dims) {
        return Err(Error::Argument(
            "l1-norm rule: band dims differ across channels or sources".into(),
        ));
    }
    let activity = |bands: &[&Matrix]| {
        let mut a = Matrix::zeros(dims.0, dims.1);
        for b in bands {
            for (acc, v) in a.data_mut().iter_mut().zip(b.data()) {
                *acc += libm::fabs(*v);
            }
        }
        a
    };
    let a1 = block_mean(&activity(bands1), radius);
    let a2 = block_mean(&activity(bands2), radius);
    let mut w1 = Matrix::zeros(dims.0, dims.1);
    let mut w2 = Matrix::zeros(dims.0, dims.1);
    for i in 0..a1.data().len() {
        let (p, q) = (a1.data()[i], a2.data()[i]);
        let s = p + q;
        let (u, v) = if s == 0.0 { (0.5, 0.5) } else { (p / s, q / s) };
        w1.data_mut()[i] = u;
        w2.data_mut()[i] = v;
    }
    Ok((w1, w2))
}

fn block_mean(m: &Matrix, radius: usize) -> Matrix {
    let r = radius as isize;
    let count = ((2 * radius + 1) * (2 * radius + 1)) as f64;
    Matrix::from_fn(m.rows(), m.cols(), |y, x| {
        let mut s = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                s += m.get_clamped(y as isize + dy, x as isize + dx);
            }
        }
        s / count
    })
}

/// l1-norm rule for one band position across the channel stack.
pub fn fuse_l1norm_band(
    bands1: &[&Matrix],
    bands2: &[&Matrix],
    radius: usize,
) -> Result<Vec<Matrix>> {
    let (w1, w2) = l1norm_weights(bands1, bands2, radius)?;
    Ok(bands1
        .iter()
        .zip(bands2)
        .map(|(b1, b2)| {
            let mut out = Matrix::zeros(b1.rows(), b1.cols());
            for i in 0..out.data().len() {
                out.data_mut()[i] = w1.data()[i] * b1.data()[i] + w2.data()[i] * b2.data()[i];
            }
            out
        })
        .collect())
}

fn check_stacks(pyrs1: &[WaveletPyramid], pyrs2: &[WaveletPyramid]) -> Result<()> {
    if pyrs1.is_empty() || pyrs1.len() != pyrs2.len() {
        return Err(Error::Argument(format!(
            "need two equal, non-empty pyramid stacks; got {} and {} channels",
            pyrs1.len(),
            pyrs2.len()
        )));
    }
    let first = &pyrs1[0];
    if pyrs1.iter().chain(pyrs2).any(|p| !p.same_structure(first)) {
        return Err(Error::Argument(
            "pyramid stacks are not structurally identical".into(),
        ));
    }
    Ok(())
}

/// l1-norm rule applied identically to every band of every level.
pub fn fuse_l1norm(
    pyrs1: &[WaveletPyramid],
    pyrs2: &[WaveletPyramid],
    radius: usize,
) -> Result<Vec<WaveletPyramid>> {
    check_stacks(pyrs1, pyrs2)?;
    let mut out: Vec<WaveletPyramid> = pyrs1.to_vec();
    let band_count = pyrs1[0].bands().len();
    let b1: Vec<Vec<&Matrix>> = pyrs1.iter().map(|p| p.bands()).collect();
    let b2: Vec<Vec<&Matrix>> = pyrs2.iter().map(|p| p.bands()).collect();
    for band in 0..band_count {
        let s1: Vec<&Matrix> = b1.iter().map(|bands| bands[band]).collect();
        let s2: Vec<&Matrix> = b2.iter().map(|bands| bands[band]).collect();
        let fused = fuse_l1norm_band(&s1, &s2, radius)?;
        for (p, m) in out.iter_mut().zip(fused) {
            *p.bands_mut()[band] = m;
        }
    }
    Ok(out)
}

/// Regional-energy rule on the approximation, variance rule on every detail band.
pub fn fuse_regional(
    p1: &WaveletPyramid,
    p2: &WaveletPyramid,
    config: &FusionRuleConfig,
) -> Result<WaveletPyramid> {
    if !p1.same_structure(p2) {
        return Err(Error::Argument(
            "pyramids are not structurally identical".into(),
        ));
    }
    let mut out = p1.clone();
    out.top_approx = fuse_low_regional(&p1.top_approx, &p2.top_approx, config)?;
    for (lv, (d1, d2)) in out.levels.iter_mut().zip(p1.levels.iter().zip(&p2.levels)) {
        lv.h = fuse_high_variance(&d1.h, &d2.h)?;
        lv.v = fuse_high_variance(&d1.v, &d2.v)?;
        lv.d = fuse_high_variance(&d1.d, &d2.d)?;
    }
    Ok(out)
}

/// Fuses two per-channel pyramid stacks under `config.rule`.
pub fn fuse_pyramids(
    pyrs1: &[WaveletPyramid],
    pyrs2: &[WaveletPyramid],
    config: &FusionRuleConfig,
) -> Result<Vec<WaveletPyramid>> {
    config.validate()?;
    check_stacks(pyrs1, pyrs2)?;
    let regional = || -> Result<Vec<WaveletPyramid>> {
        pyrs1
            .iter()
            .zip(pyrs2)
            .map(|(a, b)| fuse_regional(a, b, config))
            .collect()
    };
    match config.rule {
        FusionRule::Regional => regional(),
        FusionRule::L1Norm => fuse_l1norm(pyrs1, pyrs2, config.block_radius),
        FusionRule::Combined => {
            let r = regional()?;
            let l = fuse_l1norm(pyrs1, pyrs2, config.block_radius)?;
            match config.combine {
                CombineMode::Mean => r
                    .iter()
                    .zip(&l)
                    .map(|(a, b)| a.zip_bands(b, |x, y| x.zip_map(y, |u, v| (u + v) / 2.0)))
                    .collect(),
            }
        }
    }
}
