use crate::conv::convolve_plane_separable;
use crate::error::{Error, Result};
use crate::image::{gaussian_taps_1d, BinaryMask, Mask};

/// Default feather radius in pixels.
pub const DEFAULT_FEATHER_RADIUS: f64 = 3.0;
/// Values this close to 0 or 1 are snapped, keeping flat areas exact.
const SNAP: f64 = 1e-9;

/// Softens a binary mask with a Gaussian of `sigma = radius / 2`.
///
/// Radius 0 returns the hard mask as alpha. The kernel is truncated at
/// three standard deviations, so alpha is non-zero only within
/// `1.5 * radius` pixels of the set region.
pub fn feather(hard: &BinaryMask, radius: f64) -> Result<Mask> {
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(Error::invalid(format!(
            "feather radius {radius} must be >= 0"
        )));
    }
    if radius == 0.0 {
        return Ok(hard.to_mask());
    }
    let sigma = radius / 2.0;
    let taps = gaussian_taps_1d(sigma, (3.0 * sigma).ceil().max(1.0) as usize);
    let (w, h) = (hard.width(), hard.height());
    let plane: Vec<f64> = hard
        .bits()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    let alpha = convolve_plane_separable(&plane, w, h, &taps)
        .into_iter()
        .map(|a| {
            if a < SNAP {
                0.0
            } else if a > 1.0 - SNAP {
                1.0
            } else {
                a
            }
        })
        .collect();
    Mask::new(w, h, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::segment::morphology::dilate;

    #[test]
    fn radius_zero_is_hard() {
        let (_, truth) = fixtures::disk(32, 32, 9.0);
        assert_eq!(feather(&truth, 0.0).unwrap(), truth.to_mask());
    }

    #[test]
    fn all_ones_stays_all_ones() {
        let m = BinaryMask::from_fn(17, 13, |_, _| true);
        for r in [0.5, 3.0, 10.0] {
            assert!(feather(&m, r).unwrap().alpha().iter().all(|&a| a == 1.0));
        }
    }

    #[test]
    fn half_plane_profile() {
        let m = fixtures::half_plane(64, 8);
        let a = feather(&m, 4.0).unwrap();
        let profile: Vec<f64> = (0..64).map(|x| a.get(x, 4)).collect();
        assert!(profile.windows(2).all(|p| p[1] <= p[0]));
        assert!((profile[31] - 0.5).abs() <= 0.1 && (profile[32] - 0.5).abs() <= 0.1);
        assert!(((profile[31] + profile[32]) / 2.0 - 0.5).abs() < 1e-9);
        // Gaussian CDF oracle at the two pixel centres straddling the edge (sigma 2).
        let cdf = |d: f64| 0.5 * (1.0 + erf(d / (2.0 * std::f64::consts::SQRT_2)));
        assert!((profile[28] - cdf(3.5)).abs() < 0.02);
    }

    #[test]
    fn support_within_dilation() {
        let (_, truth) = fixtures::disk(48, 48, 8.0);
        for r in [1.0, 3.0, 5.0] {
            let a = feather(&truth, r).unwrap();
            let grown = dilate(&truth, 2 * (3.0 * r) as usize + 1);
            for (i, &v) in a.alpha().iter().enumerate() {
                assert!(v == 0.0 || grown.bits()[i]);
            }
        }
    }

    // Abramowitz-Stegun 7.1.26, accurate to 1.5e-7.
    fn erf(x: f64) -> f64 {
        let t = 1.0 / (1.0 + 0.3275911 * x.abs());
        let y = 1.0
            - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
                + 0.254829592)
                * t
                * (-x * x).exp();
        y.copysign(x)
    }
}
