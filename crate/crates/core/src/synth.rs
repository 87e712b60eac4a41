//! Seeded synthetic test scenes and multi-focus source pairs.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::GrayImage;
use crate::ssim::gaussian_1d;
use crate::tensor::Matrix;

/// Smooth background, a few soft blobs, and hard-edged rectangles and stripes.
pub fn scene(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let gx = rng.gen_range(-0.3..0.3);
    let gy = rng.gen_range(-0.3..0.3);
    let base = rng.gen_range(0.3..0.7);
    let mut m = Matrix::from_fn(height, width, |y, x| {
        base + gx * (x as f64 / w - 0.5) + gy * (y as f64 / h - 0.5)
    });
    for _ in 0..rng.gen_range(2..5) {
        let (cx, cy) = (rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        let r = rng.gen_range(0.08..0.25) * w.min(h);
        let amp = rng.gen_range(-0.35..0.35);
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let d2 = (dx * dx + dy * dy) / (r * r);
                let v = m.get(y, x) + amp * libm::exp(-d2);
                m.set(y, x, v);
            }
        }
    }
    for _ in 0..rng.gen_range(1..4) {
        let x0 = rng.gen_range(0..width);
        let y0 = rng.gen_range(0..height);
        let x1 = (x0 + rng.gen_range(1..=width / 2 + 1)).min(width);
        let y1 = (y0 + rng.gen_range(1..=height / 2 + 1)).min(height);
        let v = rng.gen_range(0.0..1.0);
        for y in y0..y1 {
            for x in x0..x1 {
                m.set(y, x, 0.5 * m.get(y, x) + 0.5 * v);
            }
        }
    }
    if rng.gen_bool(0.5) {
        let period = rng.gen_range(4.0..12.0);
        let amp = rng.gen_range(0.05..0.2);
        let horizontal = rng.gen_bool(0.5);
        for y in 0..height {
            for x in 0..width {
                let t = if horizontal { y } else { x } as f64;
                let v = m.get(y, x) + amp * libm::sin(core::f64::consts::TAU * t / period);
                m.set(y, x, v);
            }
        }
    }
    GrayImage::from_matrix_clamped(&m).expect("dims are positive")
}

/// Separable Gaussian blur with replicated edges.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    let radius = libm::ceil(3.0 * sigma) as usize;
    let g = gaussian_1d(2 * radius + 1, sigma);
    let m = img.to_matrix();
    let r = radius as isize;
    let horiz = Matrix::from_fn(m.rows(), m.cols(), |y, x| {
        g.iter()
            .enumerate()
            .map(|(i, w)| w * m.get_clamped(y as isize, x as isize + i as isize - r))
            .sum()
    });
    let out = Matrix::from_fn(m.rows(), m.cols(), |y, x| {
        g.iter()
            .enumerate()
            .map(|(i, w)| w * horiz.get_clamped(y as isize + i as isize - r, x as isize))
            .sum()
    });
    GrayImage::from_matrix_clamped(&out).expect("dims are positive")
}

/// A sharp scene and two sources: the first blurred on its right half, the
/// second on its left half.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiFocusPair {
    pub sharp: GrayImage,
    pub a: GrayImage,
    pub b: GrayImage,
}

pub fn multi_focus_pair(width: usize, height: usize, seed: u64, sigma: f64) -> MultiFocusPair {
    let sharp = scene(width, height, seed);
    let blurred = gaussian_blur(&sharp, sigma);
    let half = width / 2;
    let pick = |left_sharp: bool| -> GrayImage {
        let px: Vec<f64> = (0..width * height)
            .map(|i| {
                let x = i % width;
                let use_sharp = (x < half) == left_sharp;
                if use_sharp {
                    sharp.pixels()[i]
                } else {
                    blurred.pixels()[i]
                }
            })
            .collect();
        GrayImage::new(width, height, px).expect("pixels come from valid images")
    };
    MultiFocusPair {
        a: pick(true),
        b: pick(false),
        sharp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_seeded_and_in_range() {
        let a = scene(32, 24, 1);
        assert_eq!(a, scene(32, 24, 1));
        assert_ne!(a, scene(32, 24, 2));
        assert!(a.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn blur_preserves_constants_and_pair_halves() {
        let c = GrayImage::filled(9, 7, 0.4).unwrap();
        assert!(gaussian_blur(&c, 1.5)
            .pixels()
            .iter()
            .all(|p| (p - 0.4).abs() < 1e-12));
        let p = multi_focus_pair(16, 8, 3, 2.0);
        for y in 0..8 {
            assert_eq!(p.a.get(0, y), p.sharp.get(0, y));
            assert_eq!(p.b.get(15, y), p.sharp.get(15, y));
        }
    }
}
