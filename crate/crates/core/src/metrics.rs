//! Fusion quality metrics.
//!
//! Histogram metrics work on 8-bit quantized pixels with 256 bins; SSIM-type
//! and gradient metrics use the continuous `[0, 1]` values.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::image::{quantize, GrayImage};
use crate::ssim::{ms_ssim, SsimParams};
use crate::tensor::Matrix;
use crate::wavelet::{dwt2d_level, Extension, Wavelet};

pub const BINS: usize = 256;

/// Report column names, in serialization order.
pub const METRIC_NAMES: [&str; 9] = [
    "EN",
    "CE",
    "FMI_pixel",
    "FMI_dct",
    "FMI_w",
    "Q_NICE",
    "Q_ABF",
    "VARI",
    "MS_SSIM",
];

/// The nine scores of one fused image against its two sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub en: f64,
    pub ce: f64,
    pub fmi_pixel: f64,
    pub fmi_dct: f64,
    pub fmi_w: f64,
    pub q_nice: f64,
    pub q_abf: f64,
    pub vari: f64,
    pub ms_ssim: f64,
}

impl MetricReport {
    /// Values in the order of [`METRIC_NAMES`].
    pub fn values(&self) -> [f64; 9] {
        [
            self.en,
            self.ce,
            self.fmi_pixel,
            self.fmi_dct,
            self.fmi_w,
            self.q_nice,
            self.q_abf,
            self.vari,
            self.ms_ssim,
        ]
    }

    pub fn entries(&self) -> [(&'static str, f64); 9] {
        let v = self.values();
        core::array::from_fn(|i| (METRIC_NAMES[i], v[i]))
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries()
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|e| e.1)
    }

    pub fn from_values(v: [f64; 9]) -> Self {
        Self {
            en: v[0],
            ce: v[1],
            fmi_pixel: v[2],
            fmi_dct: v[3],
            fmi_w: v[4],
            q_nice: v[5],
            q_abf: v[6],
            vari: v[7],
            ms_ssim: v[8],
        }
    }

    /// Element-wise mean of several reports.
    pub fn mean(reports: &[MetricReport]) -> Option<MetricReport> {
        if reports.is_empty() {
            return None;
        }
        let mut acc = [0.0; 9];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.values()) {
                *a += v;
            }
        }
        Some(Self::from_values(acc.map(|a| a / reports.len() as f64)))
    }
}

/// Sigmoid constants of the edge-preservation metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QabfParams {
    pub gamma_g: f64,
    pub k_g: f64,
    pub sigma_g: f64,
    pub gamma_a: f64,
    pub k_a: f64,
    pub sigma_a: f64,
}

impl Default for QabfParams {
    fn default() -> Self {
        Self {
            gamma_g: 0.9994,
            k_g: -15.0,
            sigma_g: 0.5,
            gamma_a: 0.9879,
            k_a: -22.0,
            sigma_a: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricConfig {
    pub qabf: QabfParams,
    pub ssim: SsimParams,
}

fn check_same(a: &GrayImage, b: &GrayImage, context: &str) -> Result<()> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::Argument(format!(
            "{context}: image sizes differ ({}x{} vs {}x{})",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

fn check_triple(a: &GrayImage, b: &GrayImage, f: &GrayImage, context: &str) -> Result<()> {
    check_same(a, f, context)?;
    check_same(b, f, context)
}

fn histogram(img: &GrayImage) -> [u64; BINS] {
    let mut h = [0u64; BINS];
    for &p in img.pixels() {
        h[quantize(p) as usize] += 1;
    }
    h
}

/// Base-2 entropy of a histogram given by its counts. Counts are summed in
/// ascending order so permuted histograms give bit-identical results.
fn entropy_of_counts(counts: impl Iterator<Item = u64>) -> f64 {
    let mut nz: Vec<u64> = counts.filter(|&c| c > 0).collect();
    nz.sort_unstable();
    let n: u64 = nz.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let s: f64 = nz.iter().map(|&c| c as f64 * libm::log2(c as f64)).sum();
    (libm::log2(nf) - s / nf).max(0.0)
}

/// Shannon entropy in bits of the 256-bin histogram.
pub fn entropy(img: &GrayImage) -> f64 {
    entropy_of_counts(histogram(img).into_iter())
}

fn smoothed(h: &[u64; BINS]) -> [f64; BINS] {
    let n: u64 = h.iter().sum();
    let d = (n + BINS as u64) as f64;
    h.map(|c| (c + 1) as f64 / d)
}

fn kl_bits(p: &[f64; BINS], q: &[f64; BINS]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| pi * libm::log2(pi / qi))
        .sum()
}

/// Mean of `KL(h_A || h_F)` and `KL(h_B || h_F)` in bits, add-one smoothed.
pub fn cross_entropy_metric(a: &GrayImage, b: &GrayImage, fused: &GrayImage) -> Result<f64> {
    check_triple(a, b, fused, "cross entropy")?;
    let hf = smoothed(&histogram(fused));
    let ka = kl_bits(&smoothed(&histogram(a)), &hf);
    let kb = kl_bits(&smoothed(&histogram(b)), &hf);
    Ok(((ka + kb) / 2.0).max(0.0))
}

/// Population variance of the quantized pixels (0-255 scale), computed
/// with exact integer sums.
pub fn variance_metric(img: &GrayImage) -> f64 {
    let q = img.to_u8();
    let n = q.len() as u128;
    let s: u128 = q.iter().map(|&v| v as u128).sum();
    let s2: u128 = q.iter().map(|&v| (v as u128) * (v as u128)).sum();
    (n * s2 - s * s) as f64 / (n * n) as f64
}

/// Mean of `MS-SSIM(F, A)` and `MS-SSIM(F, B)`.
pub fn ms_ssim_metric(
    a: &GrayImage,
    b: &GrayImage,
    fused: &GrayImage,
    params: &SsimParams,
) -> Result<f64> {
    check_triple(a, b, fused, "ms-ssim")?;
    let f = fused.to_matrix();
    let sa = ms_ssim(&f, &a.to_matrix(), params)?;
    let sb = ms_ssim(&f, &b.to_matrix(), params)?;
    Ok(((sa + sb) / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmiVariant {
    Pixel,
    Dct,
    Wavelet,
}

impl FmiVariant {
    pub const ALL: [FmiVariant; 3] = [FmiVariant::Pixel, FmiVariant::Dct, FmiVariant::Wavelet];
}

/// Orthonormal 8-point DCT-II matrix.
fn dct8() -> [[f64; 8]; 8] {
    let mut c = [[0.0; 8]; 8];
    for (u, row) in c.iter_mut().enumerate() {
        let s = if u == 0 {
            libm::sqrt(1.0 / 8.0)
        } else {
            libm::sqrt(2.0 / 8.0)
        };
        for (x, v) in row.iter_mut().enumerate() {
            *v = s * libm::cos((2 * x + 1) as f64 * u as f64 * PI / 16.0);
        }
    }
    c
}

/// Magnitudes of the AC coefficients of the 8x8 block DCT; DC positions are
/// zero. Edges are replicated up to a multiple of 8.
pub fn dct_feature(img: &GrayImage) -> Matrix {
    let m = img.to_matrix();
    let (r, c) = m.dims();
    let (pr, pc) = (r.div_ceil(8) * 8, c.div_ceil(8) * 8);
    let t = dct8();
    let mut out = Matrix::zeros(pr, pc);
    let mut block = [[0.0; 8]; 8];
    let mut tmp = [[0.0; 8]; 8];
    for by in (0..pr).step_by(8) {
        for bx in (0..pc).step_by(8) {
            for (i, row) in block.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = m.get((by + i).min(r - 1), (bx + j).min(c - 1));
                }
            }
            for u in 0..8 {
                for j in 0..8 {
                    tmp[u][j] = (0..8).map(|i| t[u][i] * block[i][j]).sum();
                }
            }
            for u in 0..8 {
                for v in 0..8 {
                    if u + v == 0 {
                        continue;
                    }
                    let s: f64 = (0..8).map(|j| tmp[u][j] * t[v][j]).sum();
                    out.set(by + u, bx + v, libm::fabs(s));
                }
            }
        }
    }
    Matrix::from_fn(r, c, |y, x| out.get(y, x))
}

/// Level-1 Haar detail magnitude `sqrt(H^2 + V^2 + D^2)`, nearest-neighbour
/// upsampled to the image size.
pub fn wavelet_feature(img: &GrayImage) -> Matrix {
    let m = img.to_matrix();
    let set =
        dwt2d_level(&m, &Wavelet::Db1.basis(), Extension::Symmetric).expect("image is non-empty");
    let d = &set.details;
    Matrix::from_fn(m.rows(), m.cols(), |y, x| {
        let (h, v, dd) = (
            d.h.get(y / 2, x / 2),
            d.v.get(y / 2, x / 2),
            d.d.get(y / 2, x / 2),
        );
        libm::sqrt(h * h + v * v + dd * dd)
    })
}

/// Min-max binning into 256 bins; a constant input falls in bin 0.
/// Spans below this are rounding noise of a flat feature (features are on the
/// unit pixel scale) and bin to a constant.
const FLAT_SPAN: f64 = 1e-9;

fn bin_minmax(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|&v| {
            if span > FLAT_SPAN {
                (libm::floor((v - lo) / span * BINS as f64) as usize).min(BINS - 1) as u8
            } else {
                0
            }
        })
        .collect()
}

fn feature_bins(img: &GrayImage, variant: FmiVariant) -> Vec<u8> {
    match variant {
        FmiVariant::Pixel => img.to_u8(),
        FmiVariant::Dct => bin_minmax(dct_feature(img).data()),
        FmiVariant::Wavelet => bin_minmax(wavelet_feature(img).data()),
    }
}

fn joint_counts(x: &[u8], y: &[u8]) -> Vec<u64> {
    let mut joint = vec![0u64; BINS * BINS];
    for (&a, &b) in x.iter().zip(y) {
        joint[a as usize * BINS + b as usize] += 1;
    }
    joint
}

fn marginal(x: &[u8]) -> [u64; BINS] {
    let mut h = [0u64; BINS];
    for &v in x {
        h[v as usize] += 1;
    }
    h
}

/// `2 I(X;Y) / (H(X) + H(Y))`, or 1 when both entropies vanish.
pub fn normalized_mutual_information(x: &[u8], y: &[u8]) -> f64 {
    let hx = entropy_of_counts(marginal(x).into_iter());
    let hy = entropy_of_counts(marginal(y).into_iter());
    if hx + hy == 0.0 {
        return 1.0;
    }
    let hxy = entropy_of_counts(joint_counts(x, y).into_iter());
    (2.0 * (hx + hy - hxy) / (hx + hy)).clamp(0.0, 1.0)
}

/// Feature mutual information averaged over both sources.
pub fn fmi(a: &GrayImage, b: &GrayImage, fused: &GrayImage, variant: FmiVariant) -> Result<f64> {
    check_triple(a, b, fused, "fmi")?;
    let f = feature_bins(fused, variant);
    let na = normalized_mutual_information(&f, &feature_bins(a, variant));
    let nb = normalized_mutual_information(&f, &feature_bins(b, variant));
    Ok((na + nb) / 2.0)
}

struct EdgeMap {
    strength: Vec<f64>,
    orientation: Vec<f64>,
}

/// Sobel responses with replicated borders.
fn sobel(img: &GrayImage) -> EdgeMap {
    let m = img.to_matrix();
    let (r, c) = m.dims();
    let mut strength = Vec::with_capacity(r * c);
    let mut orientation = Vec::with_capacity(r * c);
    for y in 0..r as isize {
        for x in 0..c as isize {
            let p = |dy: isize, dx: isize| m.get_clamped(y + dy, x + dx);
            let gx = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let gy = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            strength.push(libm::sqrt(gx * gx + gy * gy));
            orientation.push(if gx == 0.0 {
                if gy == 0.0 {
                    0.0
                } else {
                    FRAC_PI_2
                }
            } else {
                libm::atan(gy / gx)
            });
        }
    }
    EdgeMap {
        strength,
        orientation,
    }
}

/// Relative edge strength `min(g_s, g_f) / max(g_s, g_f)`; 1 when equal.
#[inline]
fn strength_ratio(gs: f64, gf: f64) -> f64 {
    if gs == gf {
        1.0
    } else if gs > gf {
        gf / gs
    } else {
        gs / gf
    }
}

#[inline]
fn preservation(gamma: f64, k: f64, sigma: f64, x: f64) -> f64 {
    (1.0 / (gamma * (1.0 + libm::exp(k * (x - sigma))))).min(1.0)
}

/// Per-pixel edge preservation of one source in the fused image.
fn transfer(src: &EdgeMap, fused: &EdgeMap, p: &QabfParams) -> Vec<f64> {
    (0..src.strength.len())
        .map(|i| {
            let g = strength_ratio(src.strength[i], fused.strength[i]);
            let a = 1.0 - libm::fabs(src.orientation[i] - fused.orientation[i]) / FRAC_PI_2;
            preservation(p.gamma_g, p.k_g, p.sigma_g, g)
                * preservation(p.gamma_a, p.k_a, p.sigma_a, a)
        })
        .collect()
}

/// Gradient-based edge transfer score weighted by source edge strength.
///
/// The sigmoid gains are scaled by `1 / gamma`, so a perfectly preserved edge
/// scores 1. When neither source has any edge the score is 1 for a flat
/// fused image and 0 otherwise.
pub fn q_abf_with(
    a: &GrayImage,
    b: &GrayImage,
    fused: &GrayImage,
    params: &QabfParams,
) -> Result<f64> {
    check_triple(a, b, fused, "q_abf")?;
    let (ea, eb, ef) = (sobel(a), sobel(b), sobel(fused));
    let qa = transfer(&ea, &ef, params);
    let qb = transfer(&eb, &ef, params);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..qa.len() {
        let (wa, wb) = (ea.strength[i], eb.strength[i]);
        num += qa[i] * wa + qb[i] * wb;
        den += wa + wb;
    }
    if den == 0.0 {
        return Ok(if ef.strength.iter().all(|&g| g == 0.0) {
            1.0
        } else {
            0.0
        });
    }
    Ok((num / den).clamp(0.0, 1.0))
}

pub fn q_abf(a: &GrayImage, b: &GrayImage, fused: &GrayImage) -> Result<f64> {
    q_abf_with(a, b, fused, &QabfParams::default())
}

/// Equal-frequency bin of every sample: rank by value, ties by position.
fn rank_bins(img: &GrayImage) -> Vec<u8> {
    let q = img.to_u8();
    let n = q.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| q[i]);
    let mut bins = vec![0u8; n];
    for (rank, &i) in order.iter().enumerate() {
        bins[i] = ((rank * BINS) / n) as u8;
    }
    bins
}

/// Nonlinear correlation coefficient of two rank-binned samples with
/// entropies taken in base 256, normalized so that `ncc(x, x) == 1`.
fn ncc(x: &[u8], y: &[u8]) -> f64 {
    let scale = 1.0 / libm::log2(BINS as f64);
    let hx = entropy_of_counts(marginal(x).into_iter()) * scale;
    let hy = entropy_of_counts(marginal(y).into_iter()) * scale;
    if hx + hy == 0.0 {
        return 1.0;
    }
    let hxy = entropy_of_counts(joint_counts(x, y).into_iter()) * scale;
    ((hx + hy - hxy) / ((hx + hy) / 2.0)).clamp(0.0, 1.0)
}

/// Eigenvalues of a symmetric 3x3 matrix with unit diagonal and off-diagonal
/// entries `r12, r13, r23`, in descending order. Invariant under exchanging
/// `r13` and `r23` bit for bit.
pub fn unit_diag_eigenvalues(r12: f64, r13: f64, r23: f64) -> [f64; 3] {
    let p1 = r12 * r12 + (r13 * r13 + r23 * r23);
    if p1 == 0.0 {
        return [1.0; 3];
    }
    let p = libm::sqrt(p1 / 3.0);
    let half_det = r12 * (r13 * r23) / (p * p * p);
    let phi = libm::acos(half_det.clamp(-1.0, 1.0)) / 3.0;
    let l1 = 1.0 + 2.0 * p * libm::cos(phi);
    let l3 = 1.0 + 2.0 * p * libm::cos(phi + 2.0 * PI / 3.0);
    [l1, 3.0 - l1 - l3, l3]
}

/// Nonlinear correlation information entropy of `{A, B, F}`.
pub fn q_nice(a: &GrayImage, b: &GrayImage, fused: &GrayImage) -> Result<f64> {
    check_triple(a, b, fused, "q_nice")?;
    let (ba, bb, bf) = (rank_bins(a), rank_bins(b), rank_bins(fused));
    let eig = unit_diag_eigenvalues(ncc(&ba, &bb), ncc(&ba, &bf), ncc(&bb, &bf));
    let log256 = libm::log(BINS as f64);
    let s: f64 = eig
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| {
            let t = l / 3.0;
            t * libm::log(t) / log256
        })
        .sum();
    Ok((1.0 + s).clamp(0.0, 1.0))
}

pub fn evaluate_all(a: &GrayImage, b: &GrayImage, fused: &GrayImage) -> Result<MetricReport> {
    evaluate_all_with(a, b, fused, &MetricConfig::default())
}

pub fn evaluate_all_with(
    a: &GrayImage,
    b: &GrayImage,
    fused: &GrayImage,
    config: &MetricConfig,
) -> Result<MetricReport> {
    check_triple(a, b, fused, "evaluate")?;
    let report = MetricReport {
        en: entropy(fused),
        ce: cross_entropy_metric(a, b, fused)?,
        fmi_pixel: fmi(a, b, fused, FmiVariant::Pixel)?,
        fmi_dct: fmi(a, b, fused, FmiVariant::Dct)?,
        fmi_w: fmi(a, b, fused, FmiVariant::Wavelet)?,
        q_nice: q_nice(a, b, fused)?,
        q_abf: q_abf_with(a, b, fused, &config.qabf)?,
        vari: variance_metric(fused),
        ms_ssim: ms_ssim_metric(a, b, fused, &config.ssim)?,
    };
    if let Some((name, v)) = report.entries().iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(format!("metric {name} = {v}")));
    }
    Ok(report)
}
