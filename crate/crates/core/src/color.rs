//! sRGB, linear-light and CIELAB (D65) conversions.

use crate::error::{Error, Result};
use crate::image::{ColorSpace, ImageBuffer};

// White point taken as the matrix row sums so neutral greys map to a = b = 0.
const WHITE_X: f64 = 0.412_456_4 + 0.357_576_1 + 0.180_437_5;
const WHITE_Y: f64 = 0.212_672_9 + 0.715_152_2 + 0.072_175_0;
const WHITE_Z: f64 = 0.019_333_9 + 0.119_192_0 + 0.950_304_1;

const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

#[inline]
pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
pub fn linear_to_srgb(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    if c <= 0.003_130_8 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

#[inline]
fn lab_f_inv(f: f64) -> f64 {
    let f3 = f * f * f;
    if f3 > LAB_EPSILON {
        f3
    } else {
        (116.0 * f - 16.0) / LAB_KAPPA
    }
}

/// Gamma-encoded sRGB triple to L*a*b*.
pub fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0]);
    let g = srgb_to_linear(rgb[1]);
    let b = srgb_to_linear(rgb[2]);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let fx = lab_f(x / WHITE_X);
    let fy = lab_f(y / WHITE_Y);
    let fz = lab_f(z / WHITE_Z);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// L*a*b* to gamma-encoded sRGB, clamped into gamut.
pub fn lab_to_srgb(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let x = WHITE_X * lab_f_inv(fx);
    let y = WHITE_Y * lab_f_inv(fy);
    let z = WHITE_Z * lab_f_inv(fz);
    let r = 3.240_454_2 * x - 1.537_138_5 * y - 0.498_531_4 * z;
    let g = -0.969_266_0 * x + 1.876_010_8 * y + 0.041_556_0 * z;
    let b = 0.055_643_4 * x - 0.204_025_9 * y + 1.057_225_2 * z;
    [linear_to_srgb(r), linear_to_srgb(g), linear_to_srgb(b)]
}

/// CIE76 colour difference.
#[inline]
pub fn delta_e(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dl = a[0] - b[0];
    let da = a[1] - b[1];
    let db = a[2] - b[2];
    (dl * dl + da * da + db * db).sqrt()
}

/// JFIF full-range RGB to YCbCr, all components on the `[0,1]` scale.
#[inline]
pub fn rgb_to_ycbcr(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = -0.168_735_892 * r - 0.331_264_108 * g + 0.5 * b + 0.5;
    let cr = 0.5 * r - 0.418_687_589 * g - 0.081_312_411 * b + 0.5;
    (y, cb, cr)
}

#[inline]
pub fn ycbcr_to_rgb(y: f64, cb: f64, cr: f64) -> (f64, f64, f64) {
    let cb = cb - 0.5;
    let cr = cr - 0.5;
    (
        y + 1.402 * cr,
        y - 0.344_136_286 * cb - 0.714_136_286 * cr,
        y + 1.772 * cb,
    )
}

/// Luma weights used for the luminance channel of gamma-encoded RGB.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Gamma-domain luma plane (the image itself when single-channel).
pub fn luma_plane(img: &ImageBuffer) -> Vec<f64> {
    if img.channels() == 1 {
        return img.plane(0).to_vec();
    }
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    r.iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b)
        .collect()
}

/// Converts between colour spaces.
///
/// Supported: identity, sRGB (1 or 3 channels) to Lab and LinearGray,
/// Lab to sRGB, LinearGray to sRGB (single channel) and to Lab.
pub fn convert_colorspace(img: &ImageBuffer, target: ColorSpace) -> Result<ImageBuffer> {
    use ColorSpace::*;
    let src = img.colorspace();
    if src == target {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let n = img.pixel_count();
    let rgb_at = |i: usize| -> [f64; 3] {
        if img.channels() == 1 {
            let v = img.plane(0)[i];
            [v, v, v]
        } else {
            [img.plane(0)[i], img.plane(1)[i], img.plane(2)[i]]
        }
    };
    match (src, target) {
        (Srgb, Lab) => {
            let mut planes = vec![vec![0.0; n]; 3];
            for i in 0..n {
                let lab = srgb_to_lab(rgb_at(i));
                for c in 0..3 {
                    planes[c][i] = lab[c];
                }
            }
            ImageBuffer::from_planes(w, h, Lab, planes)
        }
        (Lab, Srgb) => {
            let mut planes = vec![vec![0.0; n]; 3];
            for i in 0..n {
                let rgb = lab_to_srgb([img.plane(0)[i], img.plane(1)[i], img.plane(2)[i]]);
                for c in 0..3 {
                    planes[c][i] = rgb[c].clamp(0.0, 1.0);
                }
            }
            ImageBuffer::from_planes(w, h, Srgb, planes)
        }
        (Srgb, LinearGray) => {
            let plane = (0..n)
                .map(|i| {
                    let [r, g, b] = rgb_at(i);
                    (0.212_672_9 * srgb_to_linear(r)
                        + 0.715_152_2 * srgb_to_linear(g)
                        + 0.072_175_0 * srgb_to_linear(b))
                    .clamp(0.0, 1.0)
                })
                .collect();
            ImageBuffer::from_planes(w, h, LinearGray, vec![plane])
        }
        (LinearGray, Srgb) => {
            let plane = img.plane(0).iter().map(|&v| linear_to_srgb(v)).collect();
            ImageBuffer::from_planes(w, h, Srgb, vec![plane])
        }
        (LinearGray, Lab) => {
            let gray = convert_colorspace(img, Srgb)?;
            convert_colorspace(&gray, Lab)
        }
        (from, to) => Err(Error::invalid(format!(
            "unsupported colour conversion {from:?} -> {to:?}"
        ))),
    }
}
