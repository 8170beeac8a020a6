//! Image quality and smoothness statistics.

use crate::color::luma_plane;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// Mean squared error averaged over every sample of every channel.
pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::invalid(format!(
            "shape mismatch: {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// Peak signal-to-noise ratio with peak 1.0. Identical inputs give `f64::INFINITY`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / m).log10())
}

/// Isotropic total variation summed over channels: sum of forward-difference
/// gradient magnitudes (zero gradient across the last row/column).
pub fn total_variation(img: &ImageBuffer) -> f64 {
    let (w, h) = (img.width(), img.height());
    let mut tv = 0.0;
    for plane in img.planes() {
        for y in 0..h {
            for x in 0..w {
                let v = plane[y * w + x];
                let gx = if x + 1 < w {
                    plane[y * w + x + 1] - v
                } else {
                    0.0
                };
                let gy = if y + 1 < h {
                    plane[(y + 1) * w + x] - v
                } else {
                    0.0
                };
                tv += (gx * gx + gy * gy).sqrt();
            }
        }
    }
    tv
}

/// JPEG blockiness of the luma plane.
///
/// Mean absolute difference across 8-aligned block boundaries (horizontal
/// and vertical) minus the mean absolute difference between all other
/// adjacent pixel pairs. Near zero for content without an 8x8 grid.
pub fn blockiness(img: &ImageBuffer) -> f64 {
    blockiness_plane(&luma_plane(img), img.width(), img.height(), None)
}

/// Blockiness restricted to pairs whose pixels both satisfy `keep`.
pub(crate) fn blockiness_plane(plane: &[f64], w: usize, h: usize, keep: Option<&[bool]>) -> f64 {
    blockiness_stats(plane, w, h, keep).blockiness()
}

/// Boundary and off-boundary absolute-difference statistics of one plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlockinessStats {
    pub boundary_mean: f64,
    pub boundary_var: f64,
    pub boundary_pairs: usize,
    pub interior_mean: f64,
    pub interior_var: f64,
    pub interior_pairs: usize,
}

impl BlockinessStats {
    /// Boundary mean minus interior mean; zero when either side is empty.
    pub fn blockiness(&self) -> f64 {
        if self.boundary_pairs == 0 || self.interior_pairs == 0 {
            return 0.0;
        }
        self.boundary_mean - self.interior_mean
    }

    /// Blockiness divided by its standard error.
    pub fn z_score(&self) -> f64 {
        if self.boundary_pairs < 2 || self.interior_pairs < 2 {
            return 0.0;
        }
        let se = (self.boundary_var / self.boundary_pairs as f64
            + self.interior_var / self.interior_pairs as f64)
            .sqrt();
        if se == 0.0 {
            return if self.blockiness() > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
        }
        self.blockiness() / se
    }
}

pub(crate) fn blockiness_stats(
    plane: &[f64],
    w: usize,
    h: usize,
    keep: Option<&[bool]>,
) -> BlockinessStats {
    let ok = |i: usize| keep.is_none_or(|k| k[i]);
    // [count, sum, sum of squares] for boundary and interior pairs.
    let mut on = [0.0f64; 3];
    let mut off = [0.0f64; 3];
    let mut visit = |i: usize, j: usize, boundary: bool| {
        if ok(i) && ok(j) {
            let d = (plane[j] - plane[i]).abs();
            let acc = if boundary { &mut on } else { &mut off };
            acc[0] += 1.0;
            acc[1] += d;
            acc[2] += d * d;
        }
    };
    for y in 0..h {
        for x in 1..w {
            visit(y * w + x - 1, y * w + x, x % 8 == 0);
        }
    }
    for y in 1..h {
        for x in 0..w {
            visit((y - 1) * w + x, y * w + x, y % 8 == 0);
        }
    }
    let moments = |a: [f64; 3]| {
        if a[0] == 0.0 {
            return (0.0, 0.0);
        }
        let mean = a[1] / a[0];
        (mean, (a[2] / a[0] - mean * mean).max(0.0))
    };
    let (boundary_mean, boundary_var) = moments(on);
    let (interior_mean, interior_var) = moments(off);
    BlockinessStats {
        boundary_mean,
        boundary_var,
        boundary_pairs: on[0] as usize,
        interior_mean,
        interior_var,
        interior_pairs: off[0] as usize,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ColorSpace;

    #[test]
    fn psnr_of_identical_is_infinite() {
        let a = ImageBuffer::filled(4, 4, 3, ColorSpace::Srgb, 0.3).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_analytic_twenty_db() {
        let a = ImageBuffer::filled(8, 8, 1, ColorSpace::Srgb, 0.0).unwrap();
        let b = ImageBuffer::filled(8, 8, 1, ColorSpace::Srgb, 0.1).unwrap();
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_shape_mismatch() {
        let a = ImageBuffer::filled(8, 8, 1, ColorSpace::Srgb, 0.0).unwrap();
        let b = ImageBuffer::filled(8, 7, 1, ColorSpace::Srgb, 0.0).unwrap();
        assert!(matches!(psnr(&a, &b), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn psnr_matches_scalar_loop() {
        let a = ImageBuffer::from_fn(13, 11, 3, ColorSpace::Srgb, |c, x, y| {
            ((x * 7 + y * 3 + c) % 17) as f64 / 16.0
        })
        .unwrap();
        let b = ImageBuffer::from_fn(13, 11, 3, ColorSpace::Srgb, |c, x, y| {
            ((x * 5 + y * 11 + c * 2) % 13) as f64 / 12.0
        })
        .unwrap();
        let mut acc = 0.0;
        let mut n = 0.0;
        for c in 0..3 {
            for y in 0..11 {
                for x in 0..13 {
                    let d = a.get(c, x, y) - b.get(c, x, y);
                    acc += d * d;
                    n += 1.0;
                }
            }
        }
        let expected = 10.0 * (n / acc).log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn blockiness_detects_grid() {
        let blocky = ImageBuffer::from_fn(64, 64, 1, ColorSpace::Srgb, |_, x, y| {
            ((x / 8 + y / 8) % 3) as f64 * 0.2 + 0.1
        })
        .unwrap();
        assert!(blockiness(&blocky) > 0.05);
        let shifted = ImageBuffer::from_fn(64, 64, 1, ColorSpace::Srgb, |_, x, y| {
            (((x + 4) / 8 + (y + 4) / 8) % 3) as f64 * 0.2 + 0.1
        })
        .unwrap();
        assert!(blockiness(&shifted) < 0.0);
    }
}
