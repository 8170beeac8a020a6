//! Regularised frequency-domain deconvolution for Gaussian blur.

use rustfft::num_complex::Complex64;

use super::RestoreConstants;
use crate::degrade::BLUR_KERNEL_SIZE;
use crate::error::{Error, Result};
use crate::estimate::{estimate_noise_sigma, Degradation, DegradationParam};
use crate::fft::{fft2, kernel_to_frame};
use crate::image::{reflect101, ImageBuffer, Kernel2D};

/// Wiener-type deconvolution with regulariser `eps0 / strength`.
///
/// Solves `min |k*x - y|^2 + eps |x - y|^2` per frequency, which gives
/// `X = (conj(K) Y + eps Y) / (|K|^2 + eps)`: the plain inverse filter as
/// `eps -> 0` and the observation itself as `eps -> inf`. Each plane is
/// extended by even reflection to a `2(w-1) x 2(h-1)` period so that the
/// circular model matches the reflect-101 boundary used by the blur.
///
/// `eps0 = (sigma_n / 255)^2` with `sigma_n` measured on the frame, floored
/// at the configured minimum.
pub fn deblur_wiener(
    img: &ImageBuffer,
    param: &DegradationParam,
    strength: f64,
) -> Result<ImageBuffer> {
    let Degradation::Blur { kernel_vec, .. } = &param.clone().validated()?.degradation else {
        return Err(Error::invalid("deblur needs a blur parameter"));
    };
    if img.width() < BLUR_KERNEL_SIZE || img.height() < BLUR_KERNEL_SIZE {
        return Err(Error::invalid("deblur needs at least 15x15 pixels"));
    }
    let kernel = Kernel2D::new(BLUR_KERNEL_SIZE, kernel_vec.clone())?;
    if strength == 0.0 {
        return Ok(img.clone());
    }
    let sigma_n = estimate_noise_sigma(img, None)
        .map(|p| p.sigma_noise().unwrap_or(0.0))
        .unwrap_or(0.0);
    let eps0 = (sigma_n / 255.0)
        .powi(2)
        .max(RestoreConstants::builtin().eps_floor);
    deconvolve(img, &kernel, eps0 / strength)
}

/// Deconvolution with an explicit regulariser.
pub fn deconvolve(img: &ImageBuffer, kernel: &Kernel2D, eps: f64) -> Result<ImageBuffer> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid("regulariser must be positive"));
    }
    if (kernel.sum() - 1.0).abs() > 1e-6 {
        return Err(Error::invalid("degenerate kernel: taps must sum to 1"));
    }
    let (w, h) = (img.width(), img.height());
    let (pw, ph) = (2 * (w - 1).max(1), 2 * (h - 1).max(1));
    let mut k = kernel_to_frame(kernel.weights(), kernel.size(), pw, ph);
    fft2(&mut k, pw, ph, false);
    let norm = (pw * ph) as f64;

    let mut out = Vec::with_capacity(img.data().len());
    let mut buf = vec![Complex64::new(0.0, 0.0); pw * ph];
    for plane in img.planes() {
        for y in 0..ph {
            let sy = reflect101(y as isize, h);
            for x in 0..pw {
                buf[y * pw + x] = Complex64::new(plane[sy * w + reflect101(x as isize, w)], 0.0);
            }
        }
        fft2(&mut buf, pw, ph, false);
        for (v, kf) in buf.iter_mut().zip(&k) {
            *v = (kf.conj() * *v + *v * eps) / (kf.norm_sqr() + eps);
        }
        fft2(&mut buf, pw, ph, true);
        for y in 0..h {
            for x in 0..w {
                out.push(buf[y * pw + x].re / norm);
            }
        }
    }
    Ok(img.with_data(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::apply_blur;
    use crate::fixtures;
    use crate::metrics::psnr;

    #[test]
    fn zero_strength_is_exact_identity() {
        let img = fixtures::natural(1, 32, 32);
        let p = DegradationParam::blur(1.0, 1.0).unwrap();
        assert_eq!(deblur_wiener(&img, &p, 0.0).unwrap(), img);
    }

    #[test]
    fn tiny_sigma_is_near_identity() {
        let img = fixtures::natural(2, 48, 40);
        let p = DegradationParam::blur(0.1, 1.0).unwrap();
        let out = deblur_wiener(&img, &p, 1.0).unwrap();
        let max = img
            .data()
            .iter()
            .zip(out.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max < 1e-3, "{max}");
    }

    #[test]
    fn noiseless_round_trip() {
        let x = fixtures::natural(11, 128, 128);
        let y = apply_blur(&x, 1.5).unwrap();
        let p = DegradationParam::blur(1.5, 1.0).unwrap();
        let restored = deblur_wiener(&y, &p, 1.0).unwrap();
        let gain = psnr(&restored, &x).unwrap();
        assert!(gain >= 40.0, "{gain} (blurred {})", psnr(&y, &x).unwrap());
    }

    #[test]
    fn rejects_small_and_wrong_kind() {
        let img = fixtures::natural(1, 14, 32);
        assert!(deblur_wiener(&img, &DegradationParam::blur(1.0, 1.0).unwrap(), 1.0).is_err());
        let img = fixtures::natural(1, 32, 32);
        assert!(deblur_wiener(&img, &DegradationParam::noise(3.0, 1.0).unwrap(), 1.0).is_err());
    }
}
