//! Property tests for invariants that hold for every input.

use proptest::prelude::*;

use objrestore::compose::{composite_uncached, LayerTask, ObjectLayer, Project};
use objrestore::conv::{convolve, convolve_fft, Boundary};
use objrestore::degrade::noise_field;
use objrestore::estimate::{estimate_quality_from_tables, DegradationParam};
use objrestore::jpeg::{self, quant_tables_for_quality};
use objrestore::metrics::total_variation;
use objrestore::restore::denoise_tv;
use objrestore::segment::feather;
use objrestore::segment::rle::Rle;
use objrestore::{fixtures, gaussian_kernel, BinaryMask, ColorSpace, ImageBuffer, Mask};

// Lab planes are never clamped, which keeps linearity checks exact.
fn lab_image(w: usize, h: usize, values: &[f64]) -> ImageBuffer {
    let data: Vec<f64> = values.iter().chain(values).chain(values).copied().collect();
    ImageBuffer::new(w, h, 3, ColorSpace::Lab, data).unwrap()
}

fn field(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn convolution_is_linear(x in field(20 * 17), y in field(20 * 17), a in -3.0f64..3.0, b in -3.0f64..3.0, sigma in 0.3f64..3.0) {
        let k = gaussian_kernel(sigma, 15).unwrap();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = convolve(&lab_image(20, 17, &combo), &k, Boundary::Reflect101).unwrap();
        let cx = convolve(&lab_image(20, 17, &x), &k, Boundary::Reflect101).unwrap();
        let cy = convolve(&lab_image(20, 17, &y), &k, Boundary::Reflect101).unwrap();
        for ((l, p), q) in lhs.data().iter().zip(cx.data()).zip(cy.data()) {
            prop_assert!((l - (a * p + b * q)).abs() < 1e-9);
        }
    }

    #[test]
    fn fft_convolution_matches_direct(x in field(23 * 19), sigma in 0.3f64..3.0) {
        let k = gaussian_kernel(sigma, 15).unwrap();
        let img = lab_image(23, 19, &x);
        let direct = convolve(&img, &k, Boundary::Reflect101).unwrap();
        let fast = convolve_fft(&img, &k, Boundary::Reflect101).unwrap();
        for (d, f) in direct.data().iter().zip(fast.data()) {
            prop_assert!((d - f).abs() < 1e-9);
        }
    }

    #[test]
    fn quantisation_is_monotone_in_quality(q1 in 1u8..100, dq in 1u8..100) {
        let q2 = q1.saturating_add(dq).min(100);
        prop_assume!(q2 > q1);
        let (t1, t2) = (quant_tables_for_quality(q1).unwrap(), quant_tables_for_quality(q2).unwrap());
        for (a, b) in t1.luma_flat().iter().zip(t2.luma_flat().iter()) {
            prop_assert!(a >= b);
        }
        for (a, b) in t1.chroma_flat().iter().zip(t2.chroma_flat().iter()) {
            prop_assert!(a >= b);
        }
    }

    // High qualities share all-ones tables, so the inverse is checked on the tables.
    #[test]
    fn dqt_inversion_is_left_inverse(q in 1u8..=100) {
        let img = fixtures::natural(3, 16, 16);
        let bytes = jpeg::encode(&img, q).unwrap();
        let tables = jpeg::read_quant_tables(&bytes).unwrap();
        prop_assert_eq!(&tables, &quant_tables_for_quality(q).unwrap());
        let back = estimate_quality_from_tables(&tables).unwrap().quality().unwrap();
        prop_assert_eq!(quant_tables_for_quality(back).unwrap().luma_flat(), tables.luma_flat());
        if q <= 90 {
            prop_assert_eq!(back, q);
        }
    }

    #[test]
    fn awgn_is_white(seed in any::<u64>(), sigma in 1.0f64..50.0) {
        let n = 1 << 14;
        let f = noise_field(n, sigma, seed);
        let scale = sigma / 255.0;
        let z: Vec<f64> = f.iter().map(|v| v / scale).collect();
        let mean = z.iter().sum::<f64>() / n as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        // 5 standard errors.
        let se = 1.0 / (n as f64).sqrt();
        prop_assert!(mean.abs() < 5.0 * se);
        prop_assert!((var - 1.0).abs() < 5.0 * (2.0f64).sqrt() * se);
        for lag in [1usize, 2, 7] {
            let r = z.windows(lag + 1).map(|w| (w[0] - mean) * (w[lag] - mean)).sum::<f64>() / (n as f64 * var);
            prop_assert!(r.abs() < 5.0 * se, "lag {} r {}", lag, r);
        }
    }

    #[test]
    fn feather_stays_in_unit_range(bits in prop::collection::vec(any::<bool>(), 24 * 18), radius in 0.0f64..6.0) {
        let m = BinaryMask::new(24, 18, bits).unwrap();
        let f = feather(&m, radius).unwrap();
        prop_assert!(f.alpha().iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn rle_round_trips(bits in prop::collection::vec(any::<bool>(), 13 * 9)) {
        let m = BinaryMask::new(13, 9, bits).unwrap();
        prop_assert_eq!(Rle::encode(&m).decode().unwrap(), m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn smoothing_is_monotone_in_strength(seed in 0u64..1000, s1 in 0.0f64..2.0, ds in 0.05f64..1.0) {
        let s2 = (s1 + ds).min(2.0);
        prop_assume!(s2 > s1);
        let img = objrestore::degrade::apply_awgn(&fixtures::natural(seed, 40, 40), 25.0, seed).unwrap();
        let p = DegradationParam::noise(25.0, 1.0).unwrap();
        let a = total_variation(&denoise_tv(&img, &p, s1).unwrap());
        let b = total_variation(&denoise_tv(&img, &p, s2).unwrap());
        prop_assert!(b <= a + 1e-9, "{} -> {}", a, b);
    }

    // Disjoint layers commute.
    #[test]
    fn disjoint_layer_order_is_irrelevant(split in 8usize..40, s1 in 0.0f64..2.0, s2 in 0.0f64..2.0, c in 0.5f64..2.0) {
        let img = fixtures::natural(9, 48, 32).quantize_u8();
        let left = Mask::from_fn(48, 32, |x, _| if x < split { 1.0 } else { 0.0 }).unwrap();
        let right = Mask::from_fn(48, 32, |x, _| if x >= split { 1.0 } else { 0.0 }).unwrap();
        let mut a = ObjectLayer::new("a", left).unwrap();
        a.task = LayerTask::Denoise;
        a.predicted = Some(DegradationParam::noise(20.0, 1.0).unwrap());
        a.strength = s1;
        let mut b = ObjectLayer::new("b", right).unwrap();
        b.task = LayerTask::Deblock;
        b.predicted = Some(DegradationParam::jpeg(30, 1.0).unwrap());
        b.strength = s2;
        b.enhance.contrast = c;
        let mut ab = Project::new(img.clone(), None).unwrap();
        ab.add_layer(a.clone()).unwrap();
        ab.add_layer(b.clone()).unwrap();
        let mut ba = Project::new(img, None).unwrap();
        ba.add_layer(b).unwrap();
        ba.add_layer(a).unwrap();
        prop_assert_eq!(ab.composite().unwrap(), ba.composite().unwrap());
    }

    #[test]
    fn cached_composite_is_bit_identical(s in 0.0f64..2.0, brightness in -0.2f64..0.2, radius in 5.0f64..20.0) {
        let (img, _) = fixtures::disk(48, 48, radius);
        let img = objrestore::degrade::apply_awgn(&img, 20.0, 1).unwrap().quantize_u8();
        let (_, disk) = fixtures::disk(48, 48, radius);
        let mut layer = ObjectLayer::new("d", feather(&disk, 3.0).unwrap()).unwrap();
        layer.task = LayerTask::Denoise;
        layer.predicted = Some(DegradationParam::noise(20.0, 1.0).unwrap());
        layer.strength = s;
        layer.enhance.brightness = brightness;
        let mut layers = vec![layer];
        let first = objrestore::compose::composite(&img, &mut layers).unwrap();
        let cached = objrestore::compose::composite(&img, &mut layers).unwrap();
        let fresh = composite_uncached(&img, &layers).unwrap();
        prop_assert!(first.data().iter().zip(cached.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert!(first.data().iter().zip(fresh.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
