//! JPEG quality factor, from the stored tables when available and from
//! the decoded pixels otherwise.
//!
//! The pixel path first looks for the quantisation lattice: the aligned 8x8
//! DCT coefficients of a decoded JPEG sit on multiples of the table steps,
//! whatever the content. When no lattice survives (the image was resampled
//! or filtered after decoding), the 8x8 block-boundary discontinuity is
//! mapped through a calibration table instead. That statistic also grows
//! with the amount of detail in the content, so it is the less precise of
//! the two.

use super::{hard_region, Calibration, DegradationParam};
use crate::color::luma_plane;
use crate::error::Result;
use crate::image::{ImageBuffer, Mask};
use crate::jpeg::dct;
use crate::jpeg::tables::UNZIGZAG;
use crate::jpeg::{quant_tables_for_quality, read_quant_tables, QuantTables};
use crate::metrics::blockiness_stats;

pub use crate::metrics::BlockinessStats;

/// Qualities at which the pixel-path calibration table has knots.
pub const CALIBRATION_QUALITIES: [u8; 9] = [10, 20, 30, 40, 50, 60, 70, 80, 90];
/// Blockiness must exceed this many standard errors to count as a block grid.
const MIN_Z_SCORE: f64 = 4.0;
/// Confidence reported when no block grid is visible.
const NO_GRID_CONFIDENCE: f64 = 0.2;
/// Zig-zag positions scored by the lattice fit.
const LATTICE_POSITIONS: usize = 64;
/// AC samples a candidate must see off zero before its score counts.
const MIN_LATTICE_SAMPLES: usize = 64;
/// Lattice scores below this are treated as no lattice.
const MIN_LATTICE_SCORE: f64 = 0.5;

/// Least-squares inversion of the luma table against the scaling law.
///
/// Scans every quality in `1..=100` and keeps the one whose luma table is
/// closest in squared error; an exact match is reported with confidence 1.
pub fn estimate_quality_from_tables(tables: &QuantTables) -> Result<DegradationParam> {
    let observed = tables.luma_flat();
    let mut best = (u64::MAX, 100u8);
    for q in (1..=100u8).rev() {
        let candidate = quant_tables_for_quality(q)?.luma_flat();
        let sse: u64 = observed
            .iter()
            .zip(&candidate)
            .map(|(&a, &b)| (a as i64 - b as i64).pow(2) as u64)
            .sum();
        if sse < best.0 {
            best = (sse, q);
        }
    }
    let rmse = (best.0 as f64 / 64.0).sqrt();
    DegradationParam::jpeg(best.1, 1.0 / (1.0 + rmse))
}

/// Reads the DQT segments of a JPEG file and inverts them.
pub fn estimate_quality_from_bitstream(bytes: &[u8]) -> Result<DegradationParam> {
    estimate_quality_from_tables(&read_quant_tables(bytes)?)
}

/// Blockiness statistics of the luma plane restricted to the hard mask.
pub fn masked_blockiness(img: &ImageBuffer, mask: Option<&Mask>) -> Result<BlockinessStats> {
    let keep = hard_region(img, mask)?;
    let keep = if mask.is_some() {
        Some(keep.as_slice())
    } else {
        None
    };
    Ok(blockiness_stats(
        &luma_plane(img),
        img.width(),
        img.height(),
        keep,
    ))
}

/// Luma DCT coefficients (8-bit scale, level shifted) of every aligned block inside `keep`.
fn block_coefficients(img: &ImageBuffer, keep: &[bool]) -> Vec<[f64; LATTICE_POSITIONS]> {
    let (w, h) = (img.width(), img.height());
    let luma = luma_plane(img);
    let mut out = Vec::new();
    for by in 0..h / 8 {
        for bx in 0..w / 8 {
            let mut block = [0.0; 64];
            let mut inside = true;
            for (j, v) in block.iter_mut().enumerate() {
                let i = (by * 8 + j / 8) * w + bx * 8 + j % 8;
                inside &= keep[i];
                *v = luma[i] * 255.0 - 128.0;
            }
            if inside {
                let coef = dct::forward(&block);
                out.push(std::array::from_fn(|k| coef[UNZIGZAG[k]]));
            }
        }
    }
    out
}

/// Quality whose luma steps best explain the block coefficients, with its score.
///
/// A candidate scores the mean of `cos(2 pi F / Q)` over the coefficients it
/// would not have quantised to zero. The true table scores near 1 (less the
/// rounding noise of the 8-bit decode), coarser tables pick up odd
/// multiples at -1, and finer tables lose more to the rounding noise, so
/// the maximum sits at the encoding quality. Returns `None` when too few
/// AC coefficients are off zero to judge any candidate.
pub fn lattice_fit(img: &ImageBuffer, mask: Option<&Mask>) -> Result<Option<(u8, f64)>> {
    let keep = hard_region(img, mask)?;
    let blocks = block_coefficients(img, &keep);
    let mut best: Option<(u8, f64)> = None;
    for q in 1..=100u8 {
        let table = quant_tables_for_quality(q)?.luma_flat();
        let (mut sum, mut n, mut ac) = (0.0, 0usize, 0usize);
        for block in &blocks {
            for (k, &f) in block.iter().enumerate() {
                let step = table[UNZIGZAG[k]] as f64;
                if f.abs() < step / 2.0 {
                    continue;
                }
                sum += (std::f64::consts::TAU * f / step).cos();
                n += 1;
                ac += (k > 0) as usize;
            }
        }
        if ac < MIN_LATTICE_SAMPLES {
            continue;
        }
        let score = sum / n as f64;
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((q, score));
        }
    }
    Ok(best)
}

/// Quality from decoded pixels: the lattice fit when it is convincing,
/// otherwise [`estimate_quality_from_blockiness`].
pub fn estimate_quality_from_pixels(
    img: &ImageBuffer,
    mask: Option<&Mask>,
    calibration: &Calibration,
) -> Result<DegradationParam> {
    if let Some((q, score)) = lattice_fit(img, mask)? {
        if score >= MIN_LATTICE_SCORE {
            return DegradationParam::jpeg(q, score.min(1.0));
        }
    }
    estimate_quality_from_blockiness(img, mask, calibration)
}

/// Maps region blockiness through the calibration knots.
///
/// Without a statistically visible block grid the region is reported as
/// quality 100 with low confidence.
pub fn estimate_quality_from_blockiness(
    img: &ImageBuffer,
    mask: Option<&Mask>,
    calibration: &Calibration,
) -> Result<DegradationParam> {
    let stats = masked_blockiness(img, mask)?;
    let b = stats.blockiness();
    let knots = calibration.jpeg_blockiness();
    let last = knots.len() - 1;
    let floor = knots[last] / 2.0;
    if stats.z_score() < MIN_Z_SCORE || b <= floor {
        return DegradationParam::jpeg(100, NO_GRID_CONFIDENCE);
    }
    let q = if b >= knots[0] {
        CALIBRATION_QUALITIES[0] as f64
    } else if b <= knots[last] {
        // Between the q=90 knot and the no-grid floor, run linearly up to 100.
        let t = (knots[last] - b) / (knots[last] - floor);
        CALIBRATION_QUALITIES[last] as f64 + 10.0 * t
    } else {
        let i = knots
            .windows(2)
            .position(|k| b <= k[0] && b >= k[1])
            .expect("b lies inside the knots");
        let t = (knots[i] - b) / (knots[i] - knots[i + 1]);
        CALIBRATION_QUALITIES[i] as f64
            + t * (CALIBRATION_QUALITIES[i + 1] - CALIBRATION_QUALITIES[i]) as f64
    };
    let confidence = (stats.z_score() / 40.0).min(1.0) * 0.8;
    DegradationParam::jpeg(q.round() as u8, confidence)
}

/// Prefers the decoded tables of the original upload over the pixel path.
pub fn estimate_jpeg_quality(
    img: &ImageBuffer,
    mask: Option<&Mask>,
    tables: Option<&QuantTables>,
    calibration: &Calibration,
) -> Result<DegradationParam> {
    match tables {
        Some(t) => estimate_quality_from_tables(t),
        None => estimate_quality_from_pixels(img, mask, calibration),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::jpeg;

    #[test]
    fn tables_invert_exactly() {
        for q in 1..=100u8 {
            let p = estimate_quality_from_tables(&quant_tables_for_quality(q).unwrap()).unwrap();
            assert_eq!(p.quality(), Some(q));
            assert_eq!(p.confidence, 1.0);
        }
    }

    #[test]
    fn bitstream_path_reads_dqt() {
        let img = fixtures::natural(3, 32, 32);
        let bytes = jpeg::encode(&img, 37).unwrap();
        assert_eq!(
            estimate_quality_from_bitstream(&bytes).unwrap().quality(),
            Some(37)
        );
    }

    #[test]
    fn uncompressed_reports_no_grid() {
        let img = fixtures::natural(11, 128, 128);
        let p = estimate_quality_from_pixels(&img, None, Calibration::builtin()).unwrap();
        assert_eq!(p.quality(), Some(100));
        assert!(p.confidence < 0.3);
    }

    #[test]
    fn blockiness_path_at_q30() {
        let img = fixtures::natural(23, 128, 128);
        let decoded = jpeg::decode(&jpeg::encode(&img, 30).unwrap())
            .unwrap()
            .image;
        let q = estimate_quality_from_blockiness(&decoded, None, Calibration::builtin())
            .unwrap()
            .quality()
            .unwrap();
        assert!((20..=40).contains(&q), "{q}");
    }

    #[test]
    fn lattice_recovers_quality_on_unseen_content() {
        for seed in [101u64, 202] {
            let img = fixtures::natural(seed, 128, 128);
            for q in [10u8, 25, 50, 75, 90] {
                let decoded = jpeg::decode(&jpeg::encode(&img, q).unwrap()).unwrap().image;
                let p =
                    estimate_quality_from_pixels(&decoded, None, Calibration::builtin()).unwrap();
                assert_eq!(p.quality(), Some(q), "seed {seed}");
                assert!(p.confidence >= MIN_LATTICE_SCORE);
            }
        }
    }

    #[test]
    fn lattice_within_mask() {
        let img = fixtures::natural(5, 96, 96);
        let decoded = jpeg::decode(&jpeg::encode(&img, 40).unwrap())
            .unwrap()
            .image;
        let mask = Mask::from_fn(96, 96, |x, _| if x < 56 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(
            lattice_fit(&decoded, Some(&mask)).unwrap().map(|r| r.0),
            Some(40)
        );
    }

    #[test]
    fn resampled_decode_falls_back_to_blockiness() {
        let img = fixtures::natural(37, 128, 128);
        let decoded = jpeg::decode(&jpeg::encode(&img, 20).unwrap())
            .unwrap()
            .image;
        // A three-pixel shift moves the lattice off the 8x8 grid.
        let shifted = ImageBuffer::from_fn(120, 120, 3, decoded.colorspace(), |c, x, y| {
            decoded.get(c, x + 3, y + 3)
        })
        .unwrap();
        assert!(lattice_fit(&shifted, None)
            .unwrap()
            .is_none_or(|(_, s)| s < MIN_LATTICE_SCORE));
        let p = estimate_quality_from_pixels(&shifted, None, Calibration::builtin()).unwrap();
        assert_eq!(
            p,
            estimate_quality_from_blockiness(&shifted, None, Calibration::builtin()).unwrap()
        );
    }
}
