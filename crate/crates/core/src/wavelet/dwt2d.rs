use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::basis::{Wavelet, WaveletBasis};
use super::transform::{analyze_into, coeff_len, max_reconstruct_len, synthesize_into, Extension};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// The three detail bands of one decomposition level.
///
/// Orientation convention: `h` is low-pass along each row and high-pass down
/// each column, so it responds to horizontal edges and horizontal stripes.
/// `v` is the transpose case (vertical edges); `d` is high-pass both ways.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailBands {
    pub h: Matrix,
    pub v: Matrix,
    pub d: Matrix,
}

impl DetailBands {
    pub fn dims(&self) -> (usize, usize) {
        self.h.dims()
    }

    pub fn bands(&self) -> [&Matrix; 3] {
        [&self.h, &self.v, &self.d]
    }

    pub fn bands_mut(&mut self) -> [&mut Matrix; 3] {
        [&mut self.h, &mut self.v, &mut self.d]
    }
}

/// One level's approximation plus its detail bands.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandSet {
    pub l: Matrix,
    pub details: DetailBands,
}

/// Multi-level 2-d decomposition of one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    /// Detail bands ordered finest (level 1) to coarsest.
    pub levels: Vec<DetailBands>,
    /// Approximation band of the coarsest level.
    pub top_approx: Matrix,
    /// Input dims of each level; `level_dims[0]` is the source size.
    pub level_dims: Vec<(usize, usize)>,
    pub wavelet: Wavelet,
    pub extension: Extension,
}

impl WaveletPyramid {
    pub fn original_dims(&self) -> (usize, usize) {
        self.level_dims[0]
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// True when `other` has identical level count, band sizes, basis and extension.
    pub fn same_structure(&self, other: &WaveletPyramid) -> bool {
        self.wavelet == other.wavelet
            && self.extension == other.extension
            && self.level_dims == other.level_dims
            && self.top_approx.dims() == other.top_approx.dims()
            && self.levels.len() == other.levels.len()
            && self
                .levels
                .iter()
                .zip(&other.levels)
                .all(|(a, b)| a.dims() == b.dims())
    }

    /// All bands in a fixed order: top approximation, then `h, v, d` of each
    /// level from finest to coarsest.
    pub fn bands(&self) -> Vec<&Matrix> {
        let mut out = Vec::with_capacity(1 + 3 * self.levels.len());
        out.push(&self.top_approx);
        for lv in &self.levels {
            out.extend(lv.bands());
        }
        out
    }

    pub fn bands_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::with_capacity(1 + 3 * self.levels.len());
        out.push(&mut self.top_approx);
        for lv in &mut self.levels {
            out.extend(lv.bands_mut());
        }
        out
    }

    /// Applies `f` band-wise to two structurally identical pyramids.
    pub fn zip_bands(
        &self,
        other: &WaveletPyramid,
        f: impl Fn(&Matrix, &Matrix) -> Matrix,
    ) -> Result<WaveletPyramid> {
        if !self.same_structure(other) {
            return Err(Error::Structure(
                "pyramids differ in basis, level count or band dims".into(),
            ));
        }
        let mut out = self.clone();
        for (dst, (a, b)) in out
            .bands_mut()
            .into_iter()
            .zip(self.bands().into_iter().zip(other.bands()))
        {
            *dst = f(a, b);
        }
        Ok(out)
    }
}

/// Largest level count accepted for a `rows x cols` input: enough levels to
/// halve the longer side down to one sample, and never fewer than 3.
///
/// Boundary extension keeps every approximation at least 1x1 and the
/// round trip exact even when the filter is longer than the signal.
pub fn max_level(rows: usize, cols: usize) -> usize {
    let n = rows.max(cols).max(1);
    let halvings = (usize::BITS - (n - 1).leading_zeros()) as usize;
    halvings.max(3)
}

fn rows_analyze(m: &Matrix, basis: &WaveletBasis, ext: Extension) -> (Matrix, Matrix) {
    let (r, c) = m.dims();
    let nc = coeff_len(c, basis.taps(), ext);
    let mut lo = Matrix::zeros(r, nc);
    let mut hi = Matrix::zeros(r, nc);
    for (i, (a, d)) in lo
        .data_mut()
        .chunks_mut(nc)
        .zip(hi.data_mut().chunks_mut(nc))
        .enumerate()
    {
        analyze_into(m.row(i), basis, ext, a, d);
    }
    (lo, hi)
}

fn cols_analyze(m: &Matrix, basis: &WaveletBasis, ext: Extension) -> (Matrix, Matrix) {
    let (r, c) = m.dims();
    let nr = coeff_len(r, basis.taps(), ext);
    let mut lo = Matrix::zeros(nr, c);
    let mut hi = Matrix::zeros(nr, c);
    let mut col = vec![0.0; r];
    let mut a = vec![0.0; nr];
    let mut d = vec![0.0; nr];
    for j in 0..c {
        for (i, v) in col.iter_mut().enumerate() {
            *v = m.get(i, j);
        }
        analyze_into(&col, basis, ext, &mut a, &mut d);
        for i in 0..nr {
            lo.set(i, j, a[i]);
            hi.set(i, j, d[i]);
        }
    }
    (lo, hi)
}

fn rows_synthesize(
    lo: &Matrix,
    hi: &Matrix,
    basis: &WaveletBasis,
    ext: Extension,
    cols: usize,
) -> Matrix {
    let r = lo.rows();
    let mut out = Matrix::zeros(r, cols);
    for i in 0..r {
        synthesize_into(
            lo.row(i),
            hi.row(i),
            basis,
            ext,
            &mut out.data_mut()[i * cols..(i + 1) * cols],
        );
    }
    out
}

fn cols_synthesize(
    lo: &Matrix,
    hi: &Matrix,
    basis: &WaveletBasis,
    ext: Extension,
    rows: usize,
) -> Matrix {
    let (nr, c) = lo.dims();
    let mut out = Matrix::zeros(rows, c);
    let mut a = vec![0.0; nr];
    let mut d = vec![0.0; nr];
    let mut col = vec![0.0; rows];
    for j in 0..c {
        for i in 0..nr {
            a[i] = lo.get(i, j);
            d[i] = hi.get(i, j);
        }
        synthesize_into(&a, &d, basis, ext, &mut col);
        for (i, v) in col.iter().enumerate() {
            out.set(i, j, *v);
        }
    }
    out
}

/// One separable analysis step: rows first, then columns.
pub fn dwt2d_level(m: &Matrix, basis: &WaveletBasis, ext: Extension) -> Result<SubbandSet> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::Argument(format!(
            "dwt2d_level: empty {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let (row_lo, row_hi) = rows_analyze(m, basis, ext);
    let (l, h) = cols_analyze(&row_lo, basis, ext);
    let (v, d) = cols_analyze(&row_hi, basis, ext);
    Ok(SubbandSet {
        l,
        details: DetailBands { h, v, d },
    })
}

/// Inverse of [`dwt2d_level`], cropped to `target` dims.
pub fn idwt2d_level(
    set: &SubbandSet,
    basis: &WaveletBasis,
    ext: Extension,
    target: (usize, usize),
) -> Result<Matrix> {
    let dims = set.l.dims();
    for (name, band) in [
        ("H", &set.details.h),
        ("V", &set.details.v),
        ("D", &set.details.d),
    ] {
        if band.dims() != dims {
            return Err(Error::Structure(format!(
                "{name} band is {}x{} but approximation is {}x{}",
                band.rows(),
                band.cols(),
                dims.0,
                dims.1
            )));
        }
    }
    let (tr, tc) = target;
    let taps = basis.taps();
    if tr == 0
        || tc == 0
        || tr > max_reconstruct_len(dims.0, taps, ext)
        || tc > max_reconstruct_len(dims.1, taps, ext)
    {
        return Err(Error::Structure(format!(
            "cannot reconstruct {tr}x{tc} from {}x{} bands",
            dims.0, dims.1
        )));
    }
    let row_lo = cols_synthesize(&set.l, &set.details.h, basis, ext, tr);
    let row_hi = cols_synthesize(&set.details.v, &set.details.d, basis, ext, tr);
    Ok(rows_synthesize(&row_lo, &row_hi, basis, ext, tc))
}

/// Multi-level decomposition; details are stored finest-first.
pub fn wavedec2(
    m: &Matrix,
    wavelet: Wavelet,
    levels: usize,
    ext: Extension,
) -> Result<WaveletPyramid> {
    if levels == 0 {
        return Err(Error::Argument("wavedec2: levels must be >= 1".into()));
    }
    let (r, c) = m.dims();
    if r == 0 || c == 0 {
        return Err(Error::Argument(format!("wavedec2: empty {r}x{c} matrix")));
    }
    let max = max_level(r, c);
    if levels > max {
        return Err(Error::Argument(format!(
            "wavedec2: {levels} levels requested for a {r}x{c} input with {wavelet}; maximum feasible level is {max}"
        )));
    }
    let basis = wavelet.basis();
    let mut approx = m.clone();
    let mut details = Vec::with_capacity(levels);
    let mut level_dims = Vec::with_capacity(levels);
    for _ in 0..levels {
        level_dims.push(approx.dims());
        let set = dwt2d_level(&approx, &basis, ext)?;
        details.push(set.details);
        approx = set.l;
    }
    Ok(WaveletPyramid {
        levels: details,
        top_approx: approx,
        level_dims,
        wavelet,
        extension: ext,
    })
}

/// Inverse of [`wavedec2`]; output dims equal the pyramid's original dims.
pub fn waverec2(p: &WaveletPyramid) -> Result<Matrix> {
    if p.levels.is_empty() || p.level_dims.len() != p.levels.len() {
        return Err(Error::Structure(format!(
            "pyramid has {} detail levels but {} recorded level sizes",
            p.levels.len(),
            p.level_dims.len()
        )));
    }
    let basis = p.wavelet.basis();
    let mut approx = p.top_approx.clone();
    for (details, &target) in p.levels.iter().zip(&p.level_dims).rev() {
        let set = SubbandSet {
            l: approx,
            details: details.clone(),
        };
        approx = idwt2d_level(&set, &basis, p.extension, target)?;
    }
    Ok(approx)
}

#[cfg(test)]
mod tests {
    use super::super::transform::dwt1d;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn constant_level_has_double_gain() {
        let m = Matrix::filled(4, 4, 1.25);
        let s = dwt2d_level(&m, &Wavelet::Db1.basis(), Extension::Symmetric).unwrap();
        assert!(s.l.data().iter().all(|&v| (v - 2.5).abs() < 1e-14));
        for b in s.details.bands() {
            assert!(b.data().iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn horizontal_stripes_land_in_h() {
        let m = Matrix::from_fn(8, 8, |r, _| if r % 2 == 0 { 1.0 } else { -1.0 });
        let s = dwt2d_level(&m, &Wavelet::Db1.basis(), Extension::Symmetric).unwrap();
        let energy = |b: &Matrix| b.data().iter().map(|v| v * v).sum::<f64>();
        assert!(energy(&s.details.h) > 1.0);
        assert!(energy(&s.details.v) < 1e-24);
        assert!(energy(&s.details.d) < 1e-24);
        assert!(energy(&s.l) < 1e-24);

        let t = Matrix::from_fn(8, 8, |_, c| if c % 2 == 0 { 1.0 } else { -1.0 });
        let s = dwt2d_level(&t, &Wavelet::Db1.basis(), Extension::Symmetric).unwrap();
        assert!(energy(&s.details.v) > 1.0);
        assert!(energy(&s.details.h) < 1e-24);
    }

    #[test]
    fn separable_composition_of_1d_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let b = Wavelet::Db2.basis();
        let m = random_matrix(&mut rng, 5, 7);
        let s = dwt2d_level(&m, &b, Extension::Symmetric).unwrap();
        // rows
        let mut lo_rows = Vec::new();
        let mut hi_rows = Vec::new();
        for r in 0..5 {
            let (a, d) = dwt1d(m.row(r), &b, Extension::Symmetric).unwrap();
            lo_rows.push(a);
            hi_rows.push(d);
        }
        let nc = lo_rows[0].len();
        let col_split = |rows: &Vec<Vec<f64>>| {
            let mut lo = Vec::new();
            let mut hi = Vec::new();
            for j in 0..nc {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                let (a, d) = dwt1d(&col, &b, Extension::Symmetric).unwrap();
                lo.push(a);
                hi.push(d);
            }
            (lo, hi)
        };
        let (ll, lh) = col_split(&lo_rows);
        let (hl, hh) = col_split(&hi_rows);
        let check = |band: &Matrix, cols: &Vec<Vec<f64>>| {
            for (j, col) in cols.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    assert!((band.get(i, j) - v).abs() < 1e-10);
                }
            }
        };
        check(&s.l, &ll);
        check(&s.details.h, &lh);
        check(&s.details.v, &hl);
        check(&s.details.d, &hh);
    }

    #[test]
    fn single_level_pyramid_equals_level_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let m = random_matrix(&mut rng, 9, 6);
        let p = wavedec2(&m, Wavelet::Db2, 1, Extension::Symmetric).unwrap();
        let s = dwt2d_level(&m, &Wavelet::Db2.basis(), Extension::Symmetric).unwrap();
        assert_eq!(p.levels.len(), 1);
        assert_eq!(p.top_approx, s.l);
        assert_eq!(p.levels[0], s.details);
    }

    #[test]
    fn two_level_constant() {
        let p = wavedec2(
            &Matrix::filled(8, 8, 0.75),
            Wavelet::Db1,
            2,
            Extension::Symmetric,
        )
        .unwrap();
        assert!(p.top_approx.data().iter().all(|&v| (v - 3.0).abs() < 1e-13));
        for lv in &p.levels {
            for b in lv.bands() {
                assert!(b.data().iter().all(|v| v.abs() < 1e-13));
            }
        }
    }

    #[test]
    fn zeroed_details_keep_constants_and_zero_pyramid_gives_zero() {
        for w in Wavelet::ALL {
            let mut p =
                wavedec2(&Matrix::filled(30, 28, -0.4), w, 2, Extension::Symmetric).unwrap();
            for lv in &mut p.levels {
                for b in lv.bands_mut() {
                    b.data_mut().fill(0.0);
                }
            }
            let r = waverec2(&p).unwrap();
            assert!(r.data().iter().all(|v| (v + 0.4).abs() < 1e-12), "{w}");
            for b in p.bands_mut() {
                b.data_mut().fill(0.0);
            }
            assert!(waverec2(&p).unwrap().data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn excessive_levels_report_maximum() {
        let err =
            wavedec2(&Matrix::zeros(8, 8), Wavelet::Db1, 4, Extension::Symmetric).unwrap_err();
        match err {
            Error::Argument(msg) => assert!(msg.contains("maximum feasible level is 3"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(wavedec2(&Matrix::zeros(8, 8), Wavelet::Db1, 0, Extension::Symmetric).is_err());
        assert_eq!(max_level(1, 1), 3);
        assert_eq!(max_level(9, 2), 4);
        assert_eq!(max_level(64, 33), 6);
        assert!(wavedec2(&Matrix::zeros(1, 1), Wavelet::Db4, 3, Extension::Symmetric).is_ok());
    }

    #[test]
    fn inconsistent_bands_are_rejected() {
        let mut p = wavedec2(
            &Matrix::filled(8, 8, 1.0),
            Wavelet::Db1,
            2,
            Extension::Symmetric,
        )
        .unwrap();
        p.levels[1].v = Matrix::zeros(3, 2);
        assert!(matches!(waverec2(&p), Err(Error::Structure(_))));
    }

    #[test]
    fn round_trip_mixed_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for ext in [Extension::Symmetric, Extension::Periodization] {
            for w in Wavelet::ALL {
                for &(r, c) in &[(1, 1), (1, 7), (5, 3), (16, 16), (17, 31), (64, 64)] {
                    let m = random_matrix(&mut rng, r, c);
                    for lv in 1..=3 {
                        let p = wavedec2(&m, w, lv, ext).unwrap();
                        let back = waverec2(&p).unwrap();
                        assert_eq!(back.dims(), (r, c));
                        assert!(back.max_abs_diff(&m) < 1e-10, "{w} {ext:?} {r}x{c} lv={lv}");
                    }
                }
            }
        }
    }

    #[test]
    fn periodization_parseval_on_even_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for w in Wavelet::ALL {
            let m = random_matrix(&mut rng, 32, 28);
            let p = wavedec2(&m, w, 2, Extension::Periodization).unwrap();
            let e_in: f64 = m.data().iter().map(|v| v * v).sum();
            let e_out: f64 = p.bands().iter().flat_map(|b| b.data()).map(|v| v * v).sum();
            assert!((e_in - e_out).abs() < 1e-8, "{w}");
        }
    }
}
