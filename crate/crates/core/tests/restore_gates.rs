//! Regression gates for the shipped restorer constants.
//!
//! The expected numbers were measured with the constants in
//! `data/restore_constants.txt`. Retuning a constant must come with new
//! numbers here.

use objrestore::degrade::{apply_awgn, apply_blur};
use objrestore::estimate::{estimate_quality_from_tables, DegradationParam};
use objrestore::metrics::{blockiness, psnr};
use objrestore::restore::{deblock_dct_stats, denoise_tv, restore_full, RestoreConstants, Task};
use objrestore::{fixtures, jpeg};

const TOL_DB: f64 = 1e-6;
const TOL_BLOCK: f64 = 1e-9;

#[test]
fn shipped_constants() {
    let c = RestoreConstants::builtin();
    assert_eq!(c.c_tv, 0.9);
    assert_eq!(c.tv_iterations, 100);
    assert_eq!(c.tv_step, 0.248);
    assert_eq!(c.c_q, 0.2);
    assert_eq!(c.eps_floor, 1e-6);
}

fn tv_gain(seed: u64) -> f64 {
    let clean = fixtures::natural(seed, 256, 256);
    let noisy = apply_awgn(&clean, 25.0, seed + 1000).unwrap();
    let p = DegradationParam::noise(25.0, 1.0).unwrap();
    let out = denoise_tv(&noisy, &p, 1.0).unwrap();
    psnr(&out, &clean).unwrap() - psnr(&noisy, &clean).unwrap()
}

fn wiener_psnr() -> f64 {
    let clean = fixtures::natural(11, 128, 128);
    let blurred = apply_blur(&clean, 1.5).unwrap();
    let p = DegradationParam::blur(1.5, 1.0).unwrap();
    psnr(
        &restore_full(&blurred, Task::Deblur, &p, 1.0).unwrap(),
        &clean,
    )
    .unwrap()
}

fn deblock_pair(seed: u64, q: u8) -> (f64, f64) {
    let clean = fixtures::natural(seed, 128, 128);
    let d = jpeg::decode(&jpeg::encode(&clean, q).unwrap()).unwrap();
    let predicted = estimate_quality_from_tables(&d.tables).unwrap();
    let out = deblock_dct_stats(&d.image, &predicted, 1.0).unwrap().image;
    (blockiness(&d.image), blockiness(&out))
}

#[test]
fn tv_gain_at_sigma_25() {
    let expected = [(11, 7.812108841), (23, 8.008771387), (37, 7.615907560)];
    for (seed, want) in expected {
        let got = tv_gain(seed);
        assert!((got - want).abs() < TOL_DB, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn wiener_at_sigma_1_5() {
    let got = wiener_psnr();
    assert!((got - 43.452235556).abs() < TOL_DB, "{got}");
}

#[test]
fn deblock_blockiness() {
    let expected = [
        (11, 10, 0.020230710219, 0.009409713945),
        (11, 20, 0.012909678810, 0.005799373598),
        (11, 30, 0.010432522878, 0.005036047384),
        (23, 10, 0.018555507995, 0.008683512509),
        (23, 20, 0.013802433483, 0.006130808005),
        (23, 30, 0.010429907031, 0.005688259835),
        (37, 10, 0.018371938025, 0.008171543415),
        (37, 20, 0.013312097385, 0.005818914914),
        (37, 30, 0.010287852110, 0.004485000708),
    ];
    for (seed, q, before, after) in expected {
        let (b0, b1) = deblock_pair(seed, q);
        assert!(
            (b0 - before).abs() < TOL_BLOCK,
            "seed {seed} q {q}: before {b0}"
        );
        assert!(
            (b1 - after).abs() < TOL_BLOCK,
            "seed {seed} q {q}: after {b1}"
        );
    }
}
