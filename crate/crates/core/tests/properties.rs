use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavefuse_core::fusion::{fuse_pyramids, FusionRule, FusionRuleConfig};
use wavefuse_core::image::GrayImage;
use wavefuse_core::metrics::evaluate_all;
use wavefuse_core::numerics::{adam_step, conv2d_forward, AdamHyper, AdamState, ConvLayerParams};
use wavefuse_core::ssim::ssim;
use wavefuse_core::wavelet::{wavedec2, waverec2, Extension, Wavelet};
use wavefuse_core::{Matrix, Tensor};

fn matrix(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn image(seed: u64, w: usize, h: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::new(w, h, (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
}

fn wavelet() -> impl Strategy<Value = Wavelet> {
    prop::sample::select(Wavelet::ALL.to_vec())
}

fn extension() -> impl Strategy<Value = Extension> {
    prop::sample::select(vec![Extension::Symmetric, Extension::Periodization])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dwt_round_trip(seed: u64, rows in 1usize..40, cols in 1usize..40, wv in wavelet(), levels in 1usize..=3, ext in extension()) {
        let m = matrix(seed, rows, cols);
        let back = waverec2(&wavedec2(&m, wv, levels, ext).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&m) < 1e-10);
    }

    #[test]
    fn dwt_is_linear(seed: u64, rows in 2usize..30, cols in 2usize..30, wv in wavelet(), levels in 1usize..=3, k in -3.0f64..3.0) {
        let x = matrix(seed, rows, cols);
        let y = matrix(seed ^ 0x5555, rows, cols);
        let z = x.zip_map(&y, |a, b| k * a + b);
        let (px, py, pz) = (
            wavedec2(&x, wv, levels, Extension::Symmetric).unwrap(),
            wavedec2(&y, wv, levels, Extension::Symmetric).unwrap(),
            wavedec2(&z, wv, levels, Extension::Symmetric).unwrap(),
        );
        for ((bx, by), bz) in px.bands().into_iter().zip(py.bands()).zip(pz.bands()) {
            let expect = bx.zip_map(by, |a, b| k * a + b);
            prop_assert!(bz.max_abs_diff(&expect) < 1e-10);
        }
    }

    /// Orthogonal filters with periodic extension preserve energy on even sizes.
    #[test]
    fn periodized_dwt_preserves_energy(seed: u64, r in 1usize..6, c in 1usize..6, wv in wavelet(), levels in 1usize..=2) {
        let step = 1 << levels;
        let m = matrix(seed, r * step, c * step);
        let p = wavedec2(&m, wv, levels, Extension::Periodization).unwrap();
        let energy = |d: &[f64]| d.iter().map(|v| v * v).sum::<f64>();
        let total: f64 = p.bands().iter().map(|b| energy(b.data())).sum();
        prop_assert!((total - energy(m.data())).abs() < 1e-9 * energy(m.data()).max(1.0));
    }

    #[test]
    fn conv_is_linear_without_bias(seed: u64, c in 1usize..4, o in 1usize..4, h in 1usize..8, w in 1usize..8, k in prop::sample::select(vec![1usize, 3, 5]), s in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = |shape: &[usize]| {
            let n = shape.iter().product();
            Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
        };
        let params = ConvLayerParams::new(t(&[o, c, k, k]), Tensor::zeros(&[o])).unwrap();
        let (x, y) = (t(&[c, h, w]), t(&[c, h, w]));
        let mix = Tensor::from_vec(&[c, h, w], x.data().iter().zip(y.data()).map(|(a, b)| s * a + b).collect()).unwrap();
        let fx = conv2d_forward(&x, &params).unwrap();
        let fy = conv2d_forward(&y, &params).unwrap();
        let expect = Tensor::from_vec(&[o, h, w], fx.data().iter().zip(fy.data()).map(|(a, b)| s * a + b).collect()).unwrap();
        prop_assert!(conv2d_forward(&mix, &params).unwrap().max_abs_diff(&expect) < 1e-10);
    }

    #[test]
    fn adam_is_deterministic(seed: u64, n in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = Tensor::from_vec(&[n], (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let g = Tensor::from_vec(&[n], (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let state = AdamState::new("p", &[n], AdamHyper::default());
        let (a, sa) = adam_step(&p, &g, &state).unwrap();
        let (b, sb) = adam_step(&p, &g, &state).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(sa, sb);
        let mut q = p.clone();
        let mut st = state.clone();
        st.update(&mut q, &g).unwrap();
        prop_assert_eq!(q, a);
    }

    #[test]
    fn ssim_is_symmetric(seed: u64, w in 1usize..24, h in 1usize..24) {
        let x = image(seed, w, h).to_matrix();
        let y = image(seed.wrapping_add(1), w, h).to_matrix();
        prop_assert!((ssim(&x, &y).unwrap() - ssim(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metrics_are_in_range_and_swap_symmetric(seed: u64, w in 8usize..40, h in 8usize..40) {
        let a = image(seed, w, h);
        let b = image(seed.wrapping_add(1), w, h);
        let f = image(seed.wrapping_add(2), w, h);
        let r = evaluate_all(&a, &b, &f).unwrap();
        prop_assert!((0.0..=8.0).contains(&r.en));
        prop_assert!(r.ce >= 0.0);
        for v in [r.fmi_pixel, r.fmi_dct, r.fmi_w, r.q_nice, r.q_abf, r.ms_ssim] {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v), "{:?}", r);
        }
        prop_assert!(r.vari >= 0.0);
        let s = evaluate_all(&b, &a, &f).unwrap();
        for (x, y) in r.values().into_iter().zip(s.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn identical_triples_score_perfectly(seed: u64, w in 8usize..40, h in 8usize..40) {
        let a = image(seed, w, h);
        let r = evaluate_all(&a, &a, &a).unwrap();
        prop_assert!(r.ce.abs() < 1e-12);
        for v in [r.fmi_pixel, r.fmi_dct, r.fmi_w, r.q_nice] {
            prop_assert!((v - 1.0).abs() <= 1e-9);
        }
        prop_assert!((r.ms_ssim - 1.0).abs() <= 1e-6);
        prop_assert!(r.q_abf >= 0.99);
    }

    #[test]
    fn constant_fused_image_carries_no_information(seed: u64, w in 16usize..48, h in 16usize..48, c in 0.0f64..1.0) {
        let a = image(seed, w, h);
        let b = image(seed.wrapping_add(1), w, h);
        let f = GrayImage::filled(w, h, c).unwrap();
        let r = evaluate_all(&a, &b, &f).unwrap();
        prop_assert!(r.fmi_pixel <= 0.05 && r.fmi_dct <= 0.05 && r.fmi_w <= 0.05, "{:?}", r);
        prop_assert!(r.q_abf <= 0.05);
        prop_assert_eq!(r.vari, 0.0);
    }

    #[test]
    fn identical_pyramids_fuse_to_themselves(seed: u64, rows in 2usize..20, cols in 2usize..20, channels in 1usize..4, wv in wavelet(), levels in 1usize..=2) {
        let pyrs: Vec<_> = (0..channels as u64)
            .map(|k| wavedec2(&matrix(seed ^ k, rows, cols), wv, levels, Extension::Symmetric).unwrap())
            .collect();
        for rule in FusionRule::ALL {
            let cfg = FusionRuleConfig { rule, levels, wavelet: wv, ..FusionRuleConfig::default() };
            let fused = fuse_pyramids(&pyrs, &pyrs, &cfg).unwrap();
            for (f, p) in fused.iter().zip(&pyrs) {
                for (x, y) in f.bands().into_iter().zip(p.bands()) {
                    prop_assert!(x.max_abs_diff(y) < 1e-12);
                }
            }
        }
    }
}

#[test]
fn regional_rule_keeps_the_only_nonzero_source() {
    let cfg = FusionRuleConfig {
        rule: FusionRule::Regional,
        ..FusionRuleConfig::default()
    };
    let p1: Vec<_> = (0..3)
        .map(|k| {
            wavedec2(
                &matrix(90 + k, 16, 12),
                Wavelet::Db2,
                2,
                Extension::Symmetric,
            )
            .unwrap()
        })
        .collect();
    let p0: Vec<_> = (0..3)
        .map(|_| {
            wavedec2(
                &Matrix::zeros(16, 12),
                Wavelet::Db2,
                2,
                Extension::Symmetric,
            )
            .unwrap()
        })
        .collect();
    let fused = fuse_pyramids(&p1, &p0, &cfg).unwrap();
    assert_eq!(fused, p1);
}

#[test]
fn l1_rule_is_swap_symmetric() {
    let cfg = FusionRuleConfig {
        rule: FusionRule::L1Norm,
        ..FusionRuleConfig::default()
    };
    let make = |s: u64| -> Vec<_> {
        (0..4)
            .map(|k| {
                wavedec2(
                    &matrix(s + k, 12, 12),
                    Wavelet::Db1,
                    2,
                    Extension::Symmetric,
                )
                .unwrap()
            })
            .collect()
    };
    let (a, b) = (make(10), make(20));
    assert_eq!(
        fuse_pyramids(&a, &b, &cfg).unwrap(),
        fuse_pyramids(&b, &a, &cfg).unwrap()
    );
}
