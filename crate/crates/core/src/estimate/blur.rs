//! Gaussian blur width from the decay of edge gradient energy under re-blurring.
//!
//! The observed region is re-blurred once with a fixed width `s0` and the
//! fraction of gradient energy that survives is compared against a table
//! `r(s)`, the same fraction measured on synthetic edges blurred by each
//! grid width `s`. For an isolated edge `r(s) ~ s^2 / (s^2 + s0^2)`, which
//! rises strictly with `s`, so the grid point with the smallest residual
//! `|r_obs - r(s)|` is the estimate.
//!
//! Energy is sampled only at edge points (local maxima of the gradient
//! magnitude). Averaged over the whole region, the decay also depends on
//! how close neighbouring edges are: once blurred edges overlap, the signal
//! is nearly sinusoidal and re-blurring removes the same fraction whatever
//! the original width. Re-blurring by the candidate width itself would
//! double the blur and bring that overlap back, hence the fixed `s0`.

use super::{hard_region, Calibration, DegradationParam};
use crate::color::luma_plane;
use crate::conv::convolve_plane_separable;
use crate::degrade::BLUR_KERNEL_SIZE;
use crate::error::{Error, Result};
use crate::image::{gaussian_taps_1d, ImageBuffer, Mask};

/// Candidate widths 0.1, 0.2, ..., 3.0.
pub const BLUR_GRID: [f64; 30] = {
    let mut g = [0.0; 30];
    let mut i = 0;
    while i < 30 {
        g[i] = (i + 1) as f64 / 10.0;
        i += 1;
    }
    g
};
/// Smallest region the estimator accepts: 64x64.
pub const MIN_BLUR_PIXELS: usize = 4096;
/// Mean squared gradient below which a region carries no blur information.
const FLAT_ENERGY: f64 = 1e-8;

/// Mean squared forward difference over horizontal and vertical pairs inside `keep`.
pub fn hf_energy(plane: &[f64], w: usize, h: usize, keep: Option<&[bool]>) -> f64 {
    let ok = |i: usize| keep.is_none_or(|k| k[i]);
    let (mut sum, mut n) = (0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !ok(i) {
                continue;
            }
            if x + 1 < w && ok(i + 1) {
                let d = plane[i + 1] - plane[i];
                sum += d * d;
                n += 1;
            }
            if y + 1 < h && ok(i + w) {
                let d = plane[i + w] - plane[i];
                sum += d * d;
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Width of the probing re-blur.
pub const REBLUR_SIGMA: f64 = 1.5;
/// Smoothing applied before picking edge points, so rounding errors in the
/// measured slopes do not decide which points get picked.
const SELECTION_SIGMA: f64 = 1.0;
/// Fraction of the strongest gradient an edge point must reach.
const EDGE_FRACTION: f64 = 0.3;

/// Squared forward-difference gradient at `i`, if both neighbours are usable.
fn grad_sq(plane: &[f64], w: usize, h: usize, keep: Option<&[bool]>, i: usize) -> Option<f64> {
    let ok = |j: usize| keep.is_none_or(|k| k[j]);
    let (x, y) = (i % w, i / w);
    if x + 1 >= w || y + 1 >= h || !ok(i) || !ok(i + 1) || !ok(i + w) {
        return None;
    }
    let dx = plane[i + 1] - plane[i];
    let dy = plane[i + w] - plane[i];
    Some(dx * dx + dy * dy)
}

/// Pixels whose gradient is a 3x3 local maximum and at least [`EDGE_FRACTION`] of the strongest.
fn edge_points(plane: &[f64], w: usize, h: usize, keep: Option<&[bool]>) -> Vec<usize> {
    let g: Vec<Option<f64>> = (0..w * h).map(|i| grad_sq(plane, w, h, keep, i)).collect();
    let peak = g.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let floor = peak * EDGE_FRACTION * EDGE_FRACTION;
    (0..w * h)
        .filter(|&i| {
            let Some(gi) = g[i] else { return false };
            if gi <= 0.0 || gi < floor {
                return false;
            }
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            (-1..=1).all(|dy| {
                (-1..=1).all(|dx| {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        return true;
                    }
                    g[ny as usize * w + nx as usize].is_none_or(|gn| gn <= gi)
                })
            })
        })
        .collect()
}

fn bilinear(plane: &[f64], w: usize, h: usize, x: f64, y: f64) -> Option<f64> {
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return None;
    }
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
    let bottom = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
    Some(top * (1.0 - fy) + bottom * fy)
}

/// Squared profile slope across the edge at `i`, before and after a 1-D blur along the gradient.
///
/// Blurring along the normal only leaves the variation along the edge
/// untouched, so a pattern like `a(x) * b(y)` decays exactly as `a` does.
fn normal_slopes(
    plane: &[f64],
    smooth: &[f64],
    w: usize,
    h: usize,
    i: usize,
    taps: &[f64],
) -> Option<(f64, f64)> {
    let (x, y) = (i % w, i / w);
    let (dx, dy) = (smooth[i + 1] - smooth[i], smooth[i + w] - smooth[i]);
    let norm = dx.hypot(dy);
    let (nx, ny) = (dx / norm, dy / norm);
    // The forward differences straddle the half-pixel offset along the normal.
    let (cx, cy) = (x as f64 + 0.5 * nx.abs(), y as f64 + 0.5 * ny.abs());
    let r = taps.len() / 2;
    let l = r as isize + 1;
    let profile: Vec<f64> = (-l..l)
        .map(|k| {
            let t = k as f64 + 0.5;
            bilinear(plane, w, h, cx + t * nx, cy + t * ny)
        })
        .collect::<Option<_>>()?;
    let blurred = |j: usize| {
        taps.iter()
            .enumerate()
            .map(|(m, t)| t * profile[j + m - r])
            .sum::<f64>()
    };
    let c = r + 1;
    let d0 = profile[c] - profile[c - 1];
    let ds = blurred(c) - blurred(c - 1);
    Some((d0 * d0, ds * ds))
}

pub(crate) fn blur_plane(plane: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    convolve_plane_separable(plane, w, h, &gaussian_taps_1d(sigma, BLUR_KERNEL_SIZE / 2))
}

/// Fraction of edge gradient energy that survives one more blur of width `sigma` along each edge normal.
pub(crate) fn reblur_ratio(
    plane: &[f64],
    w: usize,
    h: usize,
    keep: Option<&[bool]>,
    sigma: f64,
) -> f64 {
    let taps = gaussian_taps_1d(sigma, BLUR_KERNEL_SIZE / 2);
    let smooth = blur_plane(plane, w, h, SELECTION_SIGMA);
    let (mut e0, mut es) = (0.0, 0.0);
    for i in edge_points(&smooth, w, h, keep) {
        if let Some((a, b)) = normal_slopes(plane, &smooth, w, h, i, &taps) {
            e0 += a;
            es += b;
        }
    }
    if e0 == 0.0 {
        1.0
    } else {
        es / e0
    }
}

/// Estimates the Gaussian blur width of the region under `mask`.
pub fn estimate_blur_sigma(
    img: &ImageBuffer,
    mask: Option<&Mask>,
    calibration: &Calibration,
) -> Result<DegradationParam> {
    let keep = hard_region(img, mask)?;
    let available = keep.iter().filter(|&&k| k).count();
    if available < MIN_BLUR_PIXELS {
        return Err(Error::InsufficientData {
            needed: MIN_BLUR_PIXELS,
            available,
        });
    }
    let (w, h) = (img.width(), img.height());
    let luma = luma_plane(img);
    let keep = if mask.is_some() {
        Some(keep.as_slice())
    } else {
        None
    };
    if hf_energy(&luma, w, h, keep) < FLAT_ENERGY {
        return Err(Error::UnobservableBlur);
    }

    let r_obs = reblur_ratio(&luma, w, h, keep, REBLUR_SIGMA);
    // Strict `<` breaks ties toward the smaller width.
    let mut best = (0usize, f64::INFINITY);
    for (i, &r_cal) in calibration.blur_ratios().iter().enumerate() {
        let residual = (r_obs - r_cal).abs();
        if residual < best.1 {
            best = (i, residual);
        }
    }
    let confidence = (1.0 - 10.0 * best.1).clamp(0.0, 1.0);
    let best = best.0;
    DegradationParam::blur(BLUR_GRID[best], confidence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::apply_blur;
    use crate::fixtures;
    use crate::image::ColorSpace;

    fn estimate(img: &ImageBuffer) -> f64 {
        estimate_blur_sigma(img, None, Calibration::builtin())
            .unwrap()
            .sigma_blur()
            .unwrap()
    }

    #[test]
    fn grid_is_exact_tenths() {
        assert_eq!(BLUR_GRID[0], 0.1);
        assert_eq!(BLUR_GRID[14], 1.5);
        assert_eq!(BLUR_GRID[29], 3.0);
    }

    #[test]
    fn checkerboard_widths() {
        let board = fixtures::checkerboard(128, 128, 16, 0.2, 0.8);
        let s = estimate(&apply_blur(&board, 1.5).unwrap());
        assert!((1.2..=1.8).contains(&s), "{s}");
        let s = estimate(&apply_blur(&board, 0.1).unwrap());
        assert!(s <= 0.3, "{s}");
    }

    #[test]
    fn flat_region_is_unobservable() {
        let img = ImageBuffer::filled(80, 80, 1, ColorSpace::Srgb, 0.4).unwrap();
        assert!(matches!(
            estimate_blur_sigma(&img, None, Calibration::builtin()),
            Err(Error::UnobservableBlur)
        ));
    }

    #[test]
    fn small_region_is_insufficient() {
        let img = fixtures::checkerboard(63, 64, 8, 0.0, 1.0);
        assert!(matches!(
            estimate_blur_sigma(&img, None, Calibration::builtin()),
            Err(Error::InsufficientData { needed: 4096, .. })
        ));
    }

    #[test]
    fn energy_matches_loop_oracle() {
        let img = fixtures::natural(4, 20, 13);
        let p = img.plane(1);
        let mut terms = vec![];
        for y in 0..13 {
            for x in 0..19 {
                terms.push((p[y * 20 + x + 1] - p[y * 20 + x]).powi(2));
            }
        }
        for y in 0..12 {
            for x in 0..20 {
                terms.push((p[(y + 1) * 20 + x] - p[y * 20 + x]).powi(2));
            }
        }
        let oracle = terms.iter().sum::<f64>() / terms.len() as f64;
        assert!((hf_energy(p, 20, 13, None) - oracle).abs() < 1e-15);
    }
}
