//! Synthetic degradations: Gaussian blur, additive white Gaussian noise and
//! JPEG compression.
//!
//! Noise is drawn from `ChaCha8Rng::seed_from_u64(seed)` with
//! `rand_distr::StandardNormal`, one draw per sample in planar order. Both
//! algorithms are fixed by the pinned crate versions, so a seed reproduces
//! the same field on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::conv::gaussian_blur_sized;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::jpeg;

pub use crate::jpeg::{quant_tables_for_quality, QuantTables};

/// Side length of every blur kernel used for synthesis and restoration.
pub const BLUR_KERNEL_SIZE: usize = 15;
pub const BLUR_SIGMA_RANGE: (f64, f64) = (0.1, 3.0);
/// Noise standard deviation range on the 8-bit scale.
pub const NOISE_SIGMA_RANGE: (f64, f64) = (0.0, 50.0);
pub const JPEG_QUALITY_RANGE: (u8, u8) = (10, 90);

/// One synthetic degradation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DegradationSpec {
    Blur { sigma_blur: f64 },
    Noise { sigma_noise: f64, rng_seed: u64 },
    Jpeg { quality: u8 },
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DegradationSpec::Blur { sigma_blur } => check_blur_sigma(sigma_blur),
            DegradationSpec::Noise { sigma_noise, .. } => check_noise_sigma(sigma_noise),
            DegradationSpec::Jpeg { quality } => {
                if (JPEG_QUALITY_RANGE.0..=JPEG_QUALITY_RANGE.1).contains(&quality) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "JPEG quality {quality} outside [10,90]"
                    )))
                }
            }
        }
    }

    /// Applies the degradation. JPEG goes through an encode/decode round trip.
    pub fn apply(&self, img: &ImageBuffer) -> Result<ImageBuffer> {
        self.validate()?;
        match *self {
            DegradationSpec::Blur { sigma_blur } => apply_blur(img, sigma_blur),
            DegradationSpec::Noise {
                sigma_noise,
                rng_seed,
            } => apply_awgn(img, sigma_noise, rng_seed),
            DegradationSpec::Jpeg { quality } => {
                Ok(jpeg::decode(&jpeg::encode(img, quality)?)?.image)
            }
        }
    }
}

fn check_blur_sigma(sigma: f64) -> Result<()> {
    if (BLUR_SIGMA_RANGE.0..=BLUR_SIGMA_RANGE.1).contains(&sigma) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "blur sigma {sigma} outside [0.1,3]"
        )))
    }
}

fn check_noise_sigma(sigma: f64) -> Result<()> {
    if (NOISE_SIGMA_RANGE.0..=NOISE_SIGMA_RANGE.1).contains(&sigma) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "noise sigma {sigma} outside [0,50]"
        )))
    }
}

/// Convolves with the 15x15 isotropic Gaussian of width `sigma_blur`.
pub fn apply_blur(img: &ImageBuffer, sigma_blur: f64) -> Result<ImageBuffer> {
    check_blur_sigma(sigma_blur)?;
    gaussian_blur_sized(img, sigma_blur, BLUR_KERNEL_SIZE)
}

/// The raw noise field `n` (unit scale) that [`apply_awgn`] adds.
pub fn noise_field(len: usize, sigma_noise: f64, rng_seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let scale = sigma_noise / 255.0;
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
        .collect()
}

/// Adds i.i.d. Gaussian noise with standard deviation `sigma_noise / 255`, then clamps.
pub fn apply_awgn(img: &ImageBuffer, sigma_noise: f64, rng_seed: u64) -> Result<ImageBuffer> {
    check_noise_sigma(sigma_noise)?;
    if sigma_noise == 0.0 {
        return Ok(img.clone());
    }
    let noise = noise_field(img.data().len(), sigma_noise, rng_seed);
    let data = img.data().iter().zip(noise).map(|(v, n)| v + n).collect();
    Ok(img.with_data(data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::image::ColorSpace;

    #[test]
    fn range_checks() {
        let img = ImageBuffer::filled(16, 16, 1, ColorSpace::Srgb, 0.5).unwrap();
        assert!(apply_blur(&img, 0.05).is_err());
        assert!(apply_blur(&img, 3.1).is_err());
        assert!(apply_awgn(&img, -1.0, 0).is_err());
        assert!(apply_awgn(&img, 51.0, 0).is_err());
        assert!(DegradationSpec::Jpeg { quality: 95 }.validate().is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let img = fixtures::natural(1, 32, 32);
        assert_eq!(apply_awgn(&img, 0.0, 9).unwrap(), img);
    }

    #[test]
    fn same_seed_same_noise() {
        let img = ImageBuffer::filled(32, 32, 3, ColorSpace::Srgb, 0.5).unwrap();
        let a = apply_awgn(&img, 20.0, 42).unwrap();
        let b = apply_awgn(&img, 20.0, 42).unwrap();
        assert_eq!(a.data(), b.data());
        assert_ne!(a.data(), apply_awgn(&img, 20.0, 43).unwrap().data());
    }

    #[test]
    fn tiny_blur_is_near_identity() {
        let img = fixtures::natural(2, 40, 40);
        let out = apply_blur(&img, 0.1).unwrap();
        let max = img
            .data()
            .iter()
            .zip(out.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max < 1e-4);
    }

    #[test]
    fn blur_reduces_max_gradient() {
        let img = fixtures::step_edge(64, 16, 0.1, 0.9);
        let out = apply_blur(&img, 3.0).unwrap();
        let max_grad = |im: &ImageBuffer| {
            let mut m: f64 = 0.0;
            for y in 0..im.height() {
                for x in 1..im.width() {
                    m = m.max((im.get(0, x, y) - im.get(0, x - 1, y)).abs());
                }
            }
            m
        };
        assert!(max_grad(&out) < max_grad(&img));
    }
}
