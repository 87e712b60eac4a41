//! In-memory grayscale images with pixels in `[0, 1]`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    /// Builds an image from row-major pixels, rejecting values outside `[0, 1]`.
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "image dims must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Argument(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Argument(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image, clamping every value into `[0, 1]` (NaN maps to 0).
    pub fn from_clamped(width: usize, height: usize, mut pixels: Vec<f64>) -> Result<Self> {
        for p in &mut pixels {
            *p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
        }
        Self::new(width, height, pixels)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, alloc::vec![value; width * height])
    }

    /// Maps 8-bit samples to `v / 255`.
    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }

    /// Quantizes to bytes with `round(clamp(p, 0, 1) * 255)`, halves rounded up.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|&p| quantize(p)).collect()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(self.height, self.width, self.pixels.clone())
            .expect("dims checked at construction")
    }

    pub fn from_matrix_clamped(m: &Matrix) -> Result<Self> {
        Self::from_clamped(m.cols(), m.rows(), m.data().to_vec())
    }

    /// `[1, H, W]` network input tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(&[1, self.height, self.width], self.pixels.clone())
            .expect("dims checked at construction")
    }
}

/// 8-bit quantization used by every writer and histogram metric.
#[inline]
pub fn quantize(p: f64) -> u8 {
    let v = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
    libm::floor(v * 255.0 + 0.5) as u8
}

/// Bilinear resampling with half-pixel centers and edge clamping.
pub fn resize_bilinear(image: &GrayImage, new_w: usize, new_h: usize) -> Result<GrayImage> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::Argument(format!(
            "resize target must be positive, got {new_w}x{new_h}"
        )));
    }
    if new_w == image.width && new_h == image.height {
        return Ok(image.clone());
    }
    let sx = image.width as f64 / new_w as f64;
    let sy = image.height as f64 / new_h as f64;
    let axis = |dst: usize, scale: f64, len: usize| -> (usize, usize, f64) {
        let src = ((dst as f64 + 0.5) * scale - 0.5).max(0.0);
        let i0 = (libm::floor(src) as usize).min(len - 1);
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, src - i0 as f64)
    };
    let mut out = Vec::with_capacity(new_w * new_h);
    for y in 0..new_h {
        let (y0, y1, fy) = axis(y, sy, image.height);
        for x in 0..new_w {
            let (x0, x1, fx) = axis(x, sx, image.width);
            let top = image.get(x0, y0) * (1.0 - fx) + image.get(x1, y0) * fx;
            let bottom = image.get(x0, y1) * (1.0 - fx) + image.get(x1, y1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    GrayImage::from_clamped(new_w, new_h, out)
}

/// Half-sample symmetric padding on the bottom and right edges.
pub fn pad_symmetric(m: &Matrix, rows: usize, cols: usize) -> Matrix {
    let (r, c) = m.dims();
    let reflect = |i: usize, n: usize| {
        let period = 2 * n;
        let k = i % period;
        if k < n {
            k
        } else {
            period - 1 - k
        }
    };
    Matrix::from_fn(rows, cols, |y, x| m.get(reflect(y, r), reflect(x, c)))
}

/// Top-left `rows x cols` block.
pub fn crop(m: &Matrix, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |y, x| m.get(y, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_rounds_half_up() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(7.0), 255);
        let img = GrayImage::from_u8(2, 2, &[0, 128, 255, 64]).unwrap();
        assert_eq!(img.pixels(), &[0.0, 128.0 / 255.0, 1.0, 64.0 / 255.0]);
        assert_eq!(img.to_u8(), [0, 128, 255, 64]);
    }

    #[test]
    fn rejects_out_of_range_pixels() {
        assert!(GrayImage::new(1, 1, alloc::vec![1.5]).is_err());
        assert!(GrayImage::new(2, 1, alloc::vec![0.5]).is_err());
        assert!(GrayImage::new(0, 1, alloc::vec![]).is_err());
    }

    #[test]
    fn resize_identity_and_constants() {
        let img = GrayImage::new(3, 2, alloc::vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        assert_eq!(resize_bilinear(&img, 3, 2).unwrap(), img);
        let c = GrayImage::filled(5, 7, 0.25).unwrap();
        let r = resize_bilinear(&c, 11, 3).unwrap();
        assert!(r.pixels().iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert!(resize_bilinear(&img, 0, 4).is_err());
    }

    #[test]
    fn resize_2x2_to_4x4_matches_hand_evaluation() {
        // corners a b / c d
        let (a, b, c, d) = (0.0, 1.0, 0.5, 0.25);
        let img = GrayImage::new(2, 2, alloc::vec![a, b, c, d]).unwrap();
        let r = resize_bilinear(&img, 4, 4).unwrap();
        // source coordinate of destination index i is (i + 0.5) / 2 - 0.5,
        // clamped at 0: [0, 0.25, 0.75, 1]
        let t = [0.0, 0.25, 0.75, 1.0];
        for (y, fy) in t.iter().enumerate() {
            for (x, fx) in t.iter().enumerate() {
                let top = a * (1.0 - fx) + b * fx;
                let bottom = c * (1.0 - fx) + d * fx;
                let expect = top * (1.0 - fy) + bottom * fy;
                assert!((r.get(x, y) - expect).abs() < 1e-15, "({x},{y})");
            }
        }
    }

    #[test]
    fn pad_then_crop_is_identity() {
        let m = Matrix::from_fn(3, 5, |y, x| (y * 5 + x) as f64);
        let p = pad_symmetric(&m, 8, 8);
        assert_eq!(p.get(3, 0), m.get(2, 0));
        assert_eq!(p.get(4, 0), m.get(1, 0));
        assert_eq!(p.get(0, 5), m.get(0, 4));
        assert_eq!(crop(&p, 3, 5), m);
    }
}
