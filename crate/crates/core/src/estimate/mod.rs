//! Blind degradation-parameter prediction, one classical estimator per task.
//!
//! Every estimator returns a [`DegradationParam`]; the same type carries a
//! user override into the restorers.

mod blur;
mod calibration;
mod jpeg_quality;
mod noise;

use serde::{Deserialize, Serialize};

use crate::degrade::{BLUR_KERNEL_SIZE, NOISE_SIGMA_RANGE};
use crate::error::{Error, Result};
use crate::image::{gaussian_kernel, ImageBuffer, Mask};

pub use blur::{estimate_blur_sigma, hf_energy, BLUR_GRID, MIN_BLUR_PIXELS, REBLUR_SIGMA};
pub use calibration::Calibration;
pub use jpeg_quality::{
    estimate_jpeg_quality, estimate_quality_from_bitstream, estimate_quality_from_blockiness,
    estimate_quality_from_pixels, estimate_quality_from_tables, lattice_fit, masked_blockiness,
    BlockinessStats, CALIBRATION_QUALITIES,
};
pub use noise::{estimate_noise_sigma, MAD_TO_SIGMA, MIN_NOISE_PIXELS};

pub use crate::metrics::blockiness;

/// Which degradation a parameter describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Blur,
    Noise,
    Jpeg,
}

/// Task-specific payload of a [`DegradationParam`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Degradation {
    /// Isotropic Gaussian blur. `kernel_vec` is the row-major 15x15 kernel;
    /// it may be left empty on input and is then derived from `sigma_blur`.
    Blur {
        sigma_blur: f64,
        #[serde(default)]
        kernel_vec: Vec<f64>,
    },
    /// Noise standard deviation on the 8-bit scale.
    Noise { sigma_noise: f64 },
    /// JPEG quality factor.
    Jpeg { quality: u8 },
}

fn default_confidence() -> f64 {
    1.0
}

/// A predicted or user-supplied degradation parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationParam {
    #[serde(flatten)]
    pub degradation: Degradation,
    /// Heuristic score in `[0,1]`; overrides default to 1.
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

/// Row-major flattening of `gaussian_kernel(sigma, 15)`.
pub fn blur_kernel_vec(sigma: f64) -> Result<Vec<f64>> {
    Ok(gaussian_kernel(sigma, BLUR_KERNEL_SIZE)?.weights().to_vec())
}

impl DegradationParam {
    pub fn blur(sigma_blur: f64, confidence: f64) -> Result<Self> {
        Self {
            degradation: Degradation::Blur {
                sigma_blur,
                kernel_vec: blur_kernel_vec(sigma_blur)?,
            },
            confidence,
        }
        .validated()
    }

    pub fn noise(sigma_noise: f64, confidence: f64) -> Result<Self> {
        Self {
            degradation: Degradation::Noise { sigma_noise },
            confidence,
        }
        .validated()
    }

    pub fn jpeg(quality: u8, confidence: f64) -> Result<Self> {
        Self {
            degradation: Degradation::Jpeg { quality },
            confidence,
        }
        .validated()
    }

    pub fn kind(&self) -> ParamKind {
        match self.degradation {
            Degradation::Blur { .. } => ParamKind::Blur,
            Degradation::Noise { .. } => ParamKind::Noise,
            Degradation::Jpeg { .. } => ParamKind::Jpeg,
        }
    }

    /// Fills a missing blur kernel and checks every type invariant.
    pub fn validated(mut self) -> Result<Self> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::invalid(format!(
                "confidence {} outside [0,1]",
                self.confidence
            )));
        }
        match &mut self.degradation {
            Degradation::Blur {
                sigma_blur,
                kernel_vec,
            } => {
                if !(sigma_blur.is_finite() && *sigma_blur > 0.0 && *sigma_blur <= 8.0) {
                    return Err(Error::invalid(format!(
                        "blur sigma {sigma_blur} outside (0,8]"
                    )));
                }
                let expected = blur_kernel_vec(*sigma_blur)?;
                if kernel_vec.is_empty() {
                    *kernel_vec = expected;
                } else {
                    if kernel_vec.len() != expected.len() {
                        return Err(Error::invalid("kernel_vec must hold 225 taps"));
                    }
                    if (kernel_vec.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
                        return Err(Error::invalid("kernel_vec must sum to 1"));
                    }
                    if kernel_vec
                        .iter()
                        .zip(&expected)
                        .any(|(a, b)| (a - b).abs() > 1e-9)
                    {
                        return Err(Error::invalid(
                            "kernel_vec is not the Gaussian of sigma_blur",
                        ));
                    }
                }
            }
            Degradation::Noise { sigma_noise } => {
                if !(NOISE_SIGMA_RANGE.0..=NOISE_SIGMA_RANGE.1).contains(sigma_noise) {
                    return Err(Error::invalid(format!(
                        "noise sigma {sigma_noise} outside [0,50]"
                    )));
                }
            }
            Degradation::Jpeg { quality } => {
                if *quality > 100 {
                    return Err(Error::invalid(format!(
                        "JPEG quality {quality} outside [0,100]"
                    )));
                }
            }
        }
        Ok(self)
    }

    pub fn sigma_blur(&self) -> Option<f64> {
        match self.degradation {
            Degradation::Blur { sigma_blur, .. } => Some(sigma_blur),
            _ => None,
        }
    }

    pub fn sigma_noise(&self) -> Option<f64> {
        match self.degradation {
            Degradation::Noise { sigma_noise } => Some(sigma_noise),
            _ => None,
        }
    }

    pub fn quality(&self) -> Option<u8> {
        match self.degradation {
            Degradation::Jpeg { quality } => Some(quality),
            _ => None,
        }
    }
}

/// Runs the estimator for `kind` on an (optionally masked) image.
pub fn estimate(
    kind: ParamKind,
    img: &ImageBuffer,
    mask: Option<&Mask>,
    calibration: &Calibration,
) -> Result<DegradationParam> {
    match kind {
        ParamKind::Noise => estimate_noise_sigma(img, mask),
        ParamKind::Blur => estimate_blur_sigma(img, mask, calibration),
        ParamKind::Jpeg => estimate_quality_from_pixels(img, mask, calibration),
    }
}

/// Pixels with alpha above 0.5, or every pixel when no mask is given.
pub(crate) fn hard_region(img: &ImageBuffer, mask: Option<&Mask>) -> Result<Vec<bool>> {
    match mask {
        None => Ok(vec![true; img.pixel_count()]),
        Some(m) => {
            if !m.matches(img) {
                return Err(Error::invalid("mask dimensions do not match image"));
            }
            Ok(m.alpha().iter().map(|&a| a > 0.5).collect())
        }
    }
}
