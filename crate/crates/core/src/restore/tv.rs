//! Total-variation denoising by Chambolle's dual projection.

use super::RestoreConstants;
use crate::color::convert_colorspace;
use crate::conv::convolve_plane_separable;
use crate::error::{Error, Result};
use crate::estimate::{Degradation, DegradationParam};
use crate::image::{ColorSpace, ImageBuffer};

/// Binomial 3-tap pass; its variance is 1/2 pixel^2 per axis.
const BINOMIAL: [f64; 3] = [0.25, 0.5, 0.25];

/// Blurs a chroma plane with per-axis variance `strength^2 / 2`.
///
/// Built from `floor(s^2)` binomial passes plus one 3-tap pass carrying the
/// fractional variance, so strength 1 is a single binomial pass and strength
/// 0 the identity. Chroma smoothing that stayed fixed while luminance
/// flattened would let chroma noise dominate the RGB gradient and make total
/// variation rise with strength.
fn chroma_blur(plane: &[f64], w: usize, h: usize, strength: f64) -> Vec<f64> {
    let passes = strength * strength;
    let whole = passes.floor();
    let frac = passes - whole;
    let mut out = plane.to_vec();
    for _ in 0..whole as usize {
        out = convolve_plane_separable(&out, w, h, &BINOMIAL);
    }
    if frac > 0.0 {
        let side = 0.25 * frac;
        out = convolve_plane_separable(&out, w, h, &[side, 1.0 - 2.0 * side, side]);
    }
    out
}

/// Denoises with `lambda = c_tv * (sigma / 255) * strength`.
///
/// Single-channel input is treated as luminance directly. Colour input is
/// converted to Lab; `L / 100` is TV-denoised and the chroma planes get a
/// blur from [`chroma_blur`].
pub fn denoise_tv(
    img: &ImageBuffer,
    param: &DegradationParam,
    strength: f64,
) -> Result<ImageBuffer> {
    let Degradation::Noise { sigma_noise } = param.clone().validated()?.degradation else {
        return Err(Error::invalid("denoise needs a noise parameter"));
    };
    let k = RestoreConstants::builtin();
    let lambda = k.c_tv * (sigma_noise / 255.0) * strength;
    if lambda == 0.0 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    match (img.channels(), img.colorspace()) {
        (1, _) => {
            let out = chambolle(img.plane(0), w, h, lambda, k.tv_iterations, k.tv_step);
            Ok(img.with_data(out))
        }
        (3, ColorSpace::Lab) => Ok(denoise_lab(img, lambda, strength, k)),
        (3, _) => {
            let lab = convert_colorspace(img, ColorSpace::Lab)?;
            convert_colorspace(&denoise_lab(&lab, lambda, strength, k), img.colorspace())
        }
        _ => Err(Error::invalid("unsupported channel layout for denoise")),
    }
}

fn denoise_lab(lab: &ImageBuffer, lambda: f64, strength: f64, k: &RestoreConstants) -> ImageBuffer {
    let (w, h) = (lab.width(), lab.height());
    let l: Vec<f64> = lab.plane(0).iter().map(|v| v / 100.0).collect();
    let mut data = chambolle(&l, w, h, lambda, k.tv_iterations, k.tv_step);
    data.iter_mut().for_each(|v| *v *= 100.0);
    for c in 1..3 {
        data.extend(chroma_blur(lab.plane(c), w, h, strength));
    }
    lab.with_data(data)
}

/// Minimises `0.5 |u - f|^2 + lambda TV(u)` on one plane.
///
/// Forward differences with a zero gradient on the last row and column, the
/// matching backward-difference divergence, and a fixed iteration count.
pub fn chambolle(
    f: &[f64],
    w: usize,
    h: usize,
    lambda: f64,
    iterations: usize,
    step: f64,
) -> Vec<f64> {
    let n = w * h;
    if lambda <= 0.0 {
        return f.to_vec();
    }
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut div = vec![0.0; n];
    let mut g = vec![0.0; n];
    for _ in 0..iterations {
        divergence(&px, &py, w, h, &mut div);
        for i in 0..n {
            g[i] = div[i] - f[i] / lambda;
        }
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let gx = if x + 1 < w { g[i + 1] - g[i] } else { 0.0 };
                let gy = if y + 1 < h { g[i + w] - g[i] } else { 0.0 };
                let mag = (gx * gx + gy * gy).sqrt();
                let denom = 1.0 + step * mag;
                px[i] = (px[i] + step * gx) / denom;
                py[i] = (py[i] + step * gy) / denom;
            }
        }
    }
    divergence(&px, &py, w, h, &mut div);
    f.iter().zip(&div).map(|(v, d)| v - lambda * d).collect()
}

/// Negative adjoint of the forward-difference gradient.
fn divergence(px: &[f64], py: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let dx = if x + 1 < w { px[i] } else { 0.0 } - if x > 0 { px[i - 1] } else { 0.0 };
            let dy = if y + 1 < h { py[i] } else { 0.0 } - if y > 0 { py[i - w] } else { 0.0 };
            out[i] = dx + dy;
        }
    }
}
