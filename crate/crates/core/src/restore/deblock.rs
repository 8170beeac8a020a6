//! Shifted-window DCT hard thresholding for JPEG block artifacts.

use super::RestoreConstants;
use crate::color::{rgb_to_ycbcr, ycbcr_to_rgb};
use crate::error::{Error, Result};
use crate::estimate::{Degradation, DegradationParam};
use crate::image::{reflect101, ColorSpace, ImageBuffer};
use crate::jpeg::{dct, quant_tables_for_quality};

/// Result of a deblocking pass together with its zeroed-coefficient count.
#[derive(Clone, Debug)]
pub struct DeblockOutput {
    pub image: ImageBuffer,
    /// AC coefficients set to zero, summed over the four shifts.
    pub zeroed: usize,
}

/// Threshold `c_q * mean(luma table) / 255 * strength`.
pub fn deblock_threshold(quality: u8, strength: f64) -> Result<f64> {
    let q = quality.max(1);
    let mean = quant_tables_for_quality(q)?.mean_luma();
    Ok(RestoreConstants::builtin().c_q * mean / 255.0 * strength)
}

pub fn deblock_dct(
    img: &ImageBuffer,
    param: &DegradationParam,
    strength: f64,
) -> Result<ImageBuffer> {
    Ok(deblock_dct_stats(img, param, strength)?.image)
}

/// Deblocks the luminance: for each shift in `{0,4}^2`, tiles the plane
/// into 8x8 blocks (reflecting past the border), zeroes AC coefficients
/// below the threshold, and averages the four reconstructions.
pub fn deblock_dct_stats(
    img: &ImageBuffer,
    param: &DegradationParam,
    strength: f64,
) -> Result<DeblockOutput> {
    let Degradation::Jpeg { quality } = param.clone().validated()?.degradation else {
        return Err(Error::invalid("deblock needs a JPEG parameter"));
    };
    if strength == 0.0 {
        return Ok(DeblockOutput {
            image: img.clone(),
            zeroed: 0,
        });
    }
    let threshold = deblock_threshold(quality, strength)?;
    let (w, h) = (img.width(), img.height());
    match (img.channels(), img.colorspace()) {
        (1, _) => {
            let (plane, zeroed) = threshold_plane(img.plane(0), w, h, threshold);
            Ok(DeblockOutput {
                image: img.with_data(plane),
                zeroed,
            })
        }
        (3, ColorSpace::Srgb) => {
            let n = w * h;
            let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
            let mut luma = vec![0.0; n];
            let mut cb = vec![0.0; n];
            let mut cr = vec![0.0; n];
            for i in 0..n {
                (luma[i], cb[i], cr[i]) = rgb_to_ycbcr(r[i], g[i], b[i]);
            }
            let (luma, zeroed) = threshold_plane(&luma, w, h, threshold);
            let mut data = vec![0.0; 3 * n];
            for i in 0..n {
                let (rr, gg, bb) = ycbcr_to_rgb(luma[i], cb[i], cr[i]);
                data[i] = rr;
                data[n + i] = gg;
                data[2 * n + i] = bb;
            }
            Ok(DeblockOutput {
                image: img.with_data(data),
                zeroed,
            })
        }
        _ => Err(Error::invalid("deblock expects sRGB input")),
    }
}

fn threshold_plane(plane: &[f64], w: usize, h: usize, threshold: f64) -> (Vec<f64>, usize) {
    let mut acc = vec![0.0; w * h];
    let mut zeroed = 0;
    let mut block = [0.0; 64];
    for (sx, sy) in [(0usize, 0usize), (4, 0), (0, 4), (4, 4)] {
        // Tile origins at s - 8, s, s + 8, ... so every pixel is covered once.
        let mut oy = sy as isize - if sy > 0 { 8 } else { 0 };
        while oy < h as isize {
            let mut ox = sx as isize - if sx > 0 { 8 } else { 0 };
            while ox < w as isize {
                for y in 0..8 {
                    let py = reflect101(oy + y as isize, h);
                    for x in 0..8 {
                        block[y * 8 + x] = plane[py * w + reflect101(ox + x as isize, w)];
                    }
                }
                let mut coef = dct::forward(&block);
                for c in coef.iter_mut().skip(1) {
                    if c.abs() < threshold {
                        *c = 0.0;
                        zeroed += 1;
                    }
                }
                let rec = dct::inverse(&coef);
                for y in 0..8 {
                    let py = oy + y as isize;
                    if py < 0 || py >= h as isize {
                        continue;
                    }
                    for x in 0..8 {
                        let px = ox + x as isize;
                        if px >= 0 && px < w as isize {
                            acc[py as usize * w + px as usize] += rec[y * 8 + x];
                        }
                    }
                }
                ox += 8;
            }
            oy += 8;
        }
    }
    acc.iter_mut().for_each(|v| *v /= 4.0);
    (acc, zeroed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::jpeg;
    use crate::metrics::blockiness;

    fn compressed(q: u8) -> ImageBuffer {
        jpeg::decode(&jpeg::encode(&fixtures::natural(11, 96, 96), q).unwrap())
            .unwrap()
            .image
    }

    #[test]
    fn zero_threshold_reconstructs_exactly() {
        let img = fixtures::natural(5, 21, 19);
        let p = img.plane(1).to_vec();
        let (out, zeroed) = threshold_plane(&p, 21, 19, 0.0);
        assert_eq!(zeroed, 0);
        assert!(p.iter().zip(&out).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn q100_is_near_identity() {
        let img = compressed(100);
        let out = deblock_dct(&img, &DegradationParam::jpeg(100, 1.0).unwrap(), 1.0).unwrap();
        let max = img
            .data()
            .iter()
            .zip(out.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max < 2e-2, "{max}");
    }

    #[test]
    fn zero_strength_is_identity() {
        let img = compressed(30);
        assert_eq!(
            deblock_dct(&img, &DegradationParam::jpeg(30, 1.0).unwrap(), 0.0).unwrap(),
            img
        );
    }

    #[test]
    fn reduces_blockiness() {
        for q in [10, 20, 30] {
            let img = compressed(q);
            let out = deblock_dct(&img, &DegradationParam::jpeg(q, 1.0).unwrap(), 1.0).unwrap();
            assert!(blockiness(&out) < blockiness(&img), "q={q}");
        }
    }

    #[test]
    fn zeroed_count_grows_with_strength() {
        let img = compressed(40);
        let p = DegradationParam::jpeg(40, 1.0).unwrap();
        let counts: Vec<usize> = [0.0, 0.5, 1.0, 1.5, 2.0]
            .iter()
            .map(|&s| deblock_dct_stats(&img, &p, s).unwrap().zeroed)
            .collect();
        assert!(counts.windows(2).all(|c| c[1] >= c[0]), "{counts:?}");
    }
}
