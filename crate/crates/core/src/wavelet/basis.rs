use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::Error;

// Daubechies scaling (decomposition low-pass) filters, in the ordering used
// by PyWavelets.
const DB1: [f64; 2] = [
    core::f64::consts::FRAC_1_SQRT_2,
    core::f64::consts::FRAC_1_SQRT_2,
];
const DB2: [f64; 4] = [
    -0.12940952255126037,
    0.2241438680420134,
    0.8365163037378079,
    0.48296291314453416,
];
const DB3: [f64; 6] = [
    0.03522629188570953,
    -0.08544127388202666,
    -0.13501102001025458,
    0.45987750211849154,
    0.8068915093110925,
    0.33267055295008263,
];
const DB4: [f64; 8] = [
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
];

/// The shipped orthonormal wavelet families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Wavelet {
    Db1,
    Db2,
    Db3,
    Db4,
}

impl Wavelet {
    pub const ALL: [Wavelet; 4] = [Wavelet::Db1, Wavelet::Db2, Wavelet::Db3, Wavelet::Db4];

    pub fn name(self) -> &'static str {
        match self {
            Wavelet::Db1 => "db1",
            Wavelet::Db2 => "db2",
            Wavelet::Db3 => "db3",
            Wavelet::Db4 => "db4",
        }
    }

    fn scaling_filter(self) -> &'static [f64] {
        match self {
            Wavelet::Db1 => &DB1,
            Wavelet::Db2 => &DB2,
            Wavelet::Db3 => &DB3,
            Wavelet::Db4 => &DB4,
        }
    }

    pub fn basis(self) -> WaveletBasis {
        WaveletBasis::from_scaling(self, self.scaling_filter())
    }
}

impl fmt::Display for Wavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Wavelet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Wavelet::ALL
            .into_iter()
            .find(|w| w.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown wavelet '{s}', valid bases: db1, db2, db3, db4"
                ))
            })
    }
}

/// Analysis and synthesis filter bank of an orthonormal wavelet.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBasis {
    pub wavelet: Wavelet,
    pub dec_lo: Vec<f64>,
    pub dec_hi: Vec<f64>,
    pub rec_lo: Vec<f64>,
    pub rec_hi: Vec<f64>,
}

impl WaveletBasis {
    fn from_scaling(wavelet: Wavelet, dec_lo: &[f64]) -> Self {
        let rec_lo: Vec<f64> = dec_lo.iter().rev().copied().collect();
        // quadrature mirror: alternating-sign reversal of the low-pass
        let dec_hi: Vec<f64> = rec_lo
            .iter()
            .enumerate()
            .map(|(i, &c)| if i % 2 == 0 { -c } else { c })
            .collect();
        let rec_hi: Vec<f64> = dec_hi.iter().rev().copied().collect();
        Self {
            wavelet,
            dec_lo: dec_lo.to_vec(),
            dec_hi,
            rec_lo,
            rec_hi,
        }
    }

    pub fn name(&self) -> &'static str {
        self.wavelet.name()
    }

    #[inline]
    pub fn taps(&self) -> usize {
        self.dec_lo.len()
    }

    /// Checks unit energy, `sum = sqrt(2)`, even-shift orthogonality, and
    /// the mirror relations between the four filters.
    pub fn check_invariants(&self, tol: f64) -> Result<(), Error> {
        let f = &self.dec_lo;
        let n = f.len();
        let sum: f64 = f.iter().sum();
        if libm::fabs(sum - core::f64::consts::SQRT_2) > tol {
            return Err(Error::Argument(format!(
                "{}: low-pass sum {sum} != sqrt(2)",
                self.name()
            )));
        }
        for shift in (0..n).step_by(2) {
            let dot: f64 = (0..n - shift).map(|i| f[i] * f[i + shift]).sum();
            let expected = if shift == 0 { 1.0 } else { 0.0 };
            if libm::fabs(dot - expected) > tol {
                return Err(Error::Argument(format!(
                    "{}: shift-{shift} autocorrelation {dot} != {expected}",
                    self.name()
                )));
            }
        }
        for i in 0..n {
            let mirror = if i % 2 == 0 {
                -f[n - 1 - i]
            } else {
                f[n - 1 - i]
            };
            if self.dec_hi[i] != mirror
                || self.rec_lo[i] != f[n - 1 - i]
                || self.rec_hi[i] != self.dec_hi[n - 1 - i]
            {
                return Err(Error::Argument(format!(
                    "{}: filter mirror relation broken at tap {i}",
                    self.name()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_shipped_basis_is_orthonormal() {
        for w in Wavelet::ALL {
            let b = w.basis();
            b.check_invariants(1e-12).unwrap();
            let energy: f64 = b.dec_lo.iter().map(|x| x * x).sum();
            assert!((energy - 1.0).abs() < 1e-12);
            let hi_sum: f64 = b.dec_hi.iter().sum();
            assert!(hi_sum.abs() < 1e-12, "{w}: high-pass has nonzero DC gain");
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("db2".parse::<Wavelet>().unwrap(), Wavelet::Db2);
        assert_eq!("DB4".parse::<Wavelet>().unwrap(), Wavelet::Db4);
        let err = "db9".parse::<Wavelet>().unwrap_err();
        assert!(format!("{err}").contains("db1, db2, db3, db4"));
    }

    #[test]
    fn haar_filters() {
        let b = Wavelet::Db1.basis();
        let a = core::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(b.dec_hi, [-a, a]);
        assert_eq!(b.rec_hi, [a, -a]);
    }
}
