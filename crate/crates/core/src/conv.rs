//! Spatial convolution with reflect-101 boundaries.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft2, kernel_to_frame};
use crate::image::{gaussian_taps_1d, reflect101, ImageBuffer, Kernel2D};

/// Boundary extension used when a kernel reaches past the image edge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Boundary {
    /// `dcb|abcd|cba`
    #[default]
    Reflect101,
}

fn check_finite(img: &ImageBuffer) -> Result<()> {
    if img.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("image contains non-finite samples"));
    }
    Ok(())
}

/// Direct 2-D convolution of every channel.
pub fn convolve(img: &ImageBuffer, k: &Kernel2D, boundary: Boundary) -> Result<ImageBuffer> {
    check_finite(img)?;
    let Boundary::Reflect101 = boundary;
    let (w, h) = (img.width(), img.height());
    let r = k.radius() as isize;
    let size = k.size();
    let mut out = Vec::with_capacity(img.data().len());
    for plane in img.planes() {
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0;
                for ky in 0..size {
                    let sy = reflect101(y - (ky as isize - r), h);
                    let row = &plane[sy * w..(sy + 1) * w];
                    for kx in 0..size {
                        let sx = reflect101(x - (kx as isize - r), w);
                        acc += k.at(ky, kx) * row[sx];
                    }
                }
                out.push(acc);
            }
        }
    }
    Ok(img.with_data(out))
}

/// FFT-based convolution, equal to [`convolve`] up to rounding.
///
/// Each plane is reflect-padded by the kernel radius and circularly
/// convolved; the wrap-around only touches the discarded padding.
pub fn convolve_fft(img: &ImageBuffer, k: &Kernel2D, boundary: Boundary) -> Result<ImageBuffer> {
    check_finite(img)?;
    let Boundary::Reflect101 = boundary;
    let (w, h) = (img.width(), img.height());
    let r = k.radius();
    let (pw, ph) = (w + 2 * r, h + 2 * r);
    let mut kf = kernel_to_frame(k.weights(), k.size(), pw, ph);
    fft2(&mut kf, pw, ph, false);
    let norm = (pw * ph) as f64;
    let mut out = Vec::with_capacity(img.data().len());
    let mut buf = vec![Complex64::new(0.0, 0.0); pw * ph];
    for plane in img.planes() {
        for py in 0..ph {
            let sy = reflect101(py as isize - r as isize, h);
            for px in 0..pw {
                let sx = reflect101(px as isize - r as isize, w);
                buf[py * pw + px] = Complex64::new(plane[sy * w + sx], 0.0);
            }
        }
        fft2(&mut buf, pw, ph, false);
        for (b, kv) in buf.iter_mut().zip(&kf) {
            *b *= kv;
        }
        fft2(&mut buf, pw, ph, true);
        for y in 0..h {
            for x in 0..w {
                out.push(buf[(y + r) * pw + x + r].re / norm);
            }
        }
    }
    Ok(img.with_data(out))
}

/// Separable convolution of one plane with symmetric 1-D taps.
pub(crate) fn convolve_plane_separable(
    plane: &[f64],
    w: usize,
    h: usize,
    taps: &[f64],
) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                acc += t * row[reflect101(x - (i as isize - r), w)];
            }
            tmp[y * w + x as usize] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                acc += t * tmp[reflect101(y - (i as isize - r), h) * w + x];
            }
            out[y as usize * w + x] = acc;
        }
    }
    out
}

/// Gaussian blur with a `size x size` kernel, computed separably.
///
/// Matches `convolve(img, gaussian_kernel(sigma, size))` up to rounding.
pub fn gaussian_blur_sized(img: &ImageBuffer, sigma: f64, size: usize) -> Result<ImageBuffer> {
    check_finite(img)?;
    if !(sigma.is_finite() && sigma > 0.0) || size < 3 || size.is_multiple_of(2) {
        return Err(Error::invalid(
            "gaussian blur needs sigma > 0 and odd size >= 3",
        ));
    }
    let taps = gaussian_taps_1d(sigma, size / 2);
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(img.data().len());
    for plane in img.planes() {
        out.extend(convolve_plane_separable(plane, w, h, &taps));
    }
    Ok(img.with_data(out))
}

/// Gaussian blur truncated at three standard deviations. `sigma == 0` is the identity.
pub fn gaussian_blur(img: &ImageBuffer, sigma: f64) -> Result<ImageBuffer> {
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    gaussian_blur_sized(img, sigma, 2 * radius + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{gaussian_kernel, ColorSpace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageBuffer::from_fn(w, h, 1, ColorSpace::Srgb, |_, _, _| rng.random::<f64>()).unwrap()
    }

    /// Scalar-loop oracle with explicit reflect-101 padding.
    fn oracle(img: &ImageBuffer, k: &Kernel2D) -> Vec<f64> {
        let (w, h) = (img.width() as isize, img.height() as isize);
        let r = k.radius() as isize;
        let fold = |i: isize, n: isize| -> isize {
            let mut i = i;
            while i < 0 || i >= n {
                if i < 0 {
                    i = -i;
                }
                if i >= n {
                    i = 2 * (n - 1) - i;
                }
            }
            i
        };
        let mut out = vec![];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let v = img.get(0, fold(x - dx, w) as usize, fold(y - dy, h) as usize);
                        acc += k.at((dy + r) as usize, (dx + r) as usize) * v;
                    }
                }
                out.push(acc);
            }
        }
        out
    }

    #[test]
    fn delta_kernel_is_identity() {
        let img = random_image(20, 17, 1);
        let out = convolve(&img, &Kernel2D::delta(15).unwrap(), Boundary::Reflect101).unwrap();
        for (a, b) in img.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_image_preserved() {
        let img = ImageBuffer::filled(19, 23, 3, ColorSpace::Srgb, 0.37).unwrap();
        let k = gaussian_kernel(2.5, 15).unwrap();
        for out in [
            convolve(&img, &k, Boundary::Reflect101).unwrap(),
            convolve_fft(&img, &k, Boundary::Reflect101).unwrap(),
        ] {
            assert!(out.data().iter().all(|v| (v - 0.37).abs() < 1e-6));
        }
    }

    #[test]
    fn direct_matches_loop_oracle() {
        let img = random_image(32, 32, 7);
        let k = gaussian_kernel(2.0, 15).unwrap();
        let out = convolve(&img, &k, Boundary::Reflect101).unwrap();
        for (a, b) in out.data().iter().zip(oracle(&img, &k)) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn fft_matches_direct_up_to_64() {
        for &(w, h, seed) in &[(9, 9, 3u64), (32, 20, 4), (64, 64, 5)] {
            let img = random_image(w, h, seed);
            let k = gaussian_kernel(1.7, 15).unwrap();
            let a = convolve(&img, &k, Boundary::Reflect101).unwrap();
            let b = convolve_fft(&img, &k, Boundary::Reflect101).unwrap();
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn separable_matches_direct() {
        let img = random_image(25, 31, 9);
        let a = convolve(
            &img,
            &gaussian_kernel(1.5, 15).unwrap(),
            Boundary::Reflect101,
        )
        .unwrap();
        let b = gaussian_blur_sized(&img, 1.5, 15).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let img = ImageBuffer::new(
            3,
            1,
            3,
            ColorSpace::Lab,
            vec![1.0, f64::INFINITY, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        );
        assert!(img.is_err());
    }
}
