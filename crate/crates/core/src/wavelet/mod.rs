//! Orthonormal Daubechies wavelets (db1-db4) and the separable multi-level
//! 2-d transform used on every feature channel.

mod basis;
mod dwt2d;
mod transform;

pub use basis::{Wavelet, WaveletBasis};
pub use dwt2d::{
    dwt2d_level, idwt2d_level, max_level, wavedec2, waverec2, DetailBands, SubbandSet,
    WaveletPyramid,
};
pub use transform::{coeff_len, dwt1d, idwt1d, Extension};
