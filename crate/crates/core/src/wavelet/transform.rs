use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::basis::WaveletBasis;
use crate::error::{Error, Result};

/// Signal extension used at the boundaries during analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extension {
    /// Half-sample symmetric: `x[-1] = x[0]`, `x[n] = x[n-1]`.
    #[default]
    Symmetric,
    /// Periodic wrap; odd lengths are first padded by repeating the last
    /// sample. Output length is `ceil(n/2)` and the transform is orthogonal
    /// on even lengths.
    Periodization,
}

/// Number of coefficients per band for an input of length `n`.
pub fn coeff_len(n: usize, taps: usize, ext: Extension) -> usize {
    match ext {
        Extension::Symmetric => (n + taps - 1) / 2,
        Extension::Periodization => n.div_ceil(2),
    }
}

#[inline]
fn symmetric_index(idx: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = idx.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

/// Single-level analysis of one signal into `(approx, detail)` bands.
///
/// Each band is `out[k] = sum_j f[j] * x_ext[2k + 1 - j]`.
pub fn dwt1d(signal: &[f64], basis: &WaveletBasis, ext: Extension) -> Result<(Vec<f64>, Vec<f64>)> {
    if signal.is_empty() {
        return Err(Error::Argument("dwt1d: empty signal".into()));
    }
    let mut approx = vec![0.0; coeff_len(signal.len(), basis.taps(), ext)];
    let mut detail = vec![0.0; approx.len()];
    analyze_into(signal, basis, ext, &mut approx, &mut detail);
    Ok((approx, detail))
}

pub(crate) fn analyze_into(
    signal: &[f64],
    basis: &WaveletBasis,
    ext: Extension,
    approx: &mut [f64],
    detail: &mut [f64],
) {
    let n = signal.len();
    let taps = basis.taps();
    match ext {
        Extension::Symmetric => {
            for k in 0..approx.len() {
                let (mut a, mut d) = (0.0, 0.0);
                let base = 2 * k as isize + 1;
                for j in 0..taps {
                    let idx = base - j as isize;
                    let x = if idx >= 0 && (idx as usize) < n {
                        signal[idx as usize]
                    } else {
                        signal[symmetric_index(idx, n)]
                    };
                    a += basis.dec_lo[j] * x;
                    d += basis.dec_hi[j] * x;
                }
                approx[k] = a;
                detail[k] = d;
            }
        }
        Extension::Periodization => {
            let padded = n + n % 2;
            let at = |i: usize| if i < n { signal[i] } else { signal[n - 1] };
            for k in 0..approx.len() {
                let (mut a, mut d) = (0.0, 0.0);
                let base = 2 * k as isize + 1;
                for j in 0..taps {
                    let idx = (base - j as isize).rem_euclid(padded as isize) as usize;
                    let x = at(idx);
                    a += basis.dec_lo[j] * x;
                    d += basis.dec_hi[j] * x;
                }
                approx[k] = a;
                detail[k] = d;
            }
        }
    }
}

/// Largest signal length a band of `coeff_count` coefficients can reconstruct.
pub fn max_reconstruct_len(coeff_count: usize, taps: usize, ext: Extension) -> usize {
    match ext {
        Extension::Symmetric => (2 * coeff_count + 2).saturating_sub(taps),
        Extension::Periodization => 2 * coeff_count,
    }
}

/// Single-level synthesis; the reconstruction is truncated to `target_len`.
pub fn idwt1d(
    approx: &[f64],
    detail: &[f64],
    basis: &WaveletBasis,
    target_len: usize,
    ext: Extension,
) -> Result<Vec<f64>> {
    if approx.len() != detail.len() {
        return Err(Error::Argument(format!(
            "idwt1d: approx has {} coefficients but detail has {}",
            approx.len(),
            detail.len()
        )));
    }
    let limit = max_reconstruct_len(approx.len(), basis.taps(), ext);
    if target_len > limit {
        return Err(Error::Argument(format!(
            "idwt1d: target length {target_len} exceeds the {limit} samples recoverable from {} coefficients",
            approx.len()
        )));
    }
    let mut out = vec![0.0; target_len];
    synthesize_into(approx, detail, basis, ext, &mut out);
    Ok(out)
}

pub(crate) fn synthesize_into(
    approx: &[f64],
    detail: &[f64],
    basis: &WaveletBasis,
    ext: Extension,
    out: &mut [f64],
) {
    let taps = basis.taps();
    let m = approx.len();
    out.fill(0.0);
    match ext {
        Extension::Symmetric => {
            // valid part of the full upsampled convolution, starting at taps - 2
            let half = taps / 2;
            for (pos, o) in out.iter_mut().enumerate() {
                let q = pos / 2;
                let parity = pos % 2;
                let i = q + half - 1;
                let mut s = 0.0;
                for j in 0..half {
                    let c = i - j;
                    if c < m {
                        s += basis.rec_lo[2 * j + parity] * approx[c]
                            + basis.rec_hi[2 * j + parity] * detail[c];
                    }
                }
                *o = s;
            }
        }
        Extension::Periodization => {
            // adjoint of the periodized analysis operator
            let padded = 2 * m;
            let mut full = vec![0.0; padded];
            for k in 0..m {
                let base = 2 * k as isize + 1;
                for j in 0..taps {
                    let idx = (base - j as isize).rem_euclid(padded as isize) as usize;
                    full[idx] += basis.dec_lo[j] * approx[k] + basis.dec_hi[j] * detail[k];
                }
            }
            let n = out.len();
            out.copy_from_slice(&full[..n]);
        }
    }
}
