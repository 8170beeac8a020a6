//! Noise level from the finest diagonal wavelet band.

use super::{hard_region, DegradationParam};
use crate::color::{luma_plane, LUMA_WEIGHTS};
use crate::error::{Error, Result};
use crate::image::{ImageBuffer, Mask};

/// Median absolute deviation of a Gaussian divided by its standard deviation.
pub const MAD_TO_SIGMA: f64 = 0.6745;
/// Smallest region (pixels with alpha > 0.5) the estimator accepts: 32x32.
pub const MIN_NOISE_PIXELS: usize = 1024;

/// Estimates the AWGN standard deviation (8-bit scale) inside `mask`.
///
/// Takes the orthonormal Haar HH coefficient of every non-overlapping 2x2
/// block that lies fully inside the region, and returns
/// `median(|HH|) / 0.6745`. For three-channel input the luma estimate is
/// rescaled by `1 / |LUMA_WEIGHTS|`, assuming independent noise per channel.
pub fn estimate_noise_sigma(img: &ImageBuffer, mask: Option<&Mask>) -> Result<DegradationParam> {
    let keep = hard_region(img, mask)?;
    let available = keep.iter().filter(|&&k| k).count();
    if available < MIN_NOISE_PIXELS {
        return Err(Error::InsufficientData {
            needed: MIN_NOISE_PIXELS,
            available,
        });
    }
    let (w, h) = (img.width(), img.height());
    let luma = luma_plane(img);
    let mut coeffs = Vec::with_capacity(available / 4);
    for by in (0..h.saturating_sub(1)).step_by(2) {
        for bx in (0..w.saturating_sub(1)).step_by(2) {
            let idx = [
                by * w + bx,
                by * w + bx + 1,
                (by + 1) * w + bx,
                (by + 1) * w + bx + 1,
            ];
            if idx.iter().any(|&i| !keep[i]) {
                continue;
            }
            let [a, b, c, d] = idx.map(|i| luma[i]);
            coeffs.push(((a - b - c + d) / 2.0).abs());
        }
    }
    if coeffs.len() < MIN_NOISE_PIXELS / 4 {
        return Err(Error::InsufficientData {
            needed: MIN_NOISE_PIXELS,
            available: coeffs.len() * 4,
        });
    }
    let mad = median(&mut coeffs);
    let mut sigma = mad / MAD_TO_SIGMA * 255.0;
    if img.channels() == 3 {
        sigma /= LUMA_WEIGHTS.iter().map(|w| w * w).sum::<f64>().sqrt();
    }
    // Standard error of a median shrinks with sqrt(n); 16k coefficients is plenty.
    let confidence = (coeffs.len() as f64 / 16384.0).sqrt().min(1.0) * 0.9;
    DegradationParam::noise(sigma.min(50.0), confidence)
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}
