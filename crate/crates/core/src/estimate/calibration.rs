//! Versioned calibration tables for the blur and JPEG-quality estimators.
//!
//! The shipped table lives in `data/calibration.txt` and is regenerated with
//! `cargo run -p objrestore --example gen_calibration`. A unit test fails
//! whenever the file and the generator disagree.

use std::sync::OnceLock;

use super::blur::{blur_plane, reblur_ratio, BLUR_GRID, REBLUR_SIGMA};
use super::jpeg_quality::CALIBRATION_QUALITIES;
use crate::error::{Error, Result};
use crate::fixtures;
use crate::jpeg;
use crate::kv::KvDocument;
use crate::metrics::blockiness;

pub const CALIBRATION_FORMAT: &str = "objrestore-calibration";
pub const CALIBRATION_VERSION: u32 = 1;

const BUILTIN_TEXT: &str = include_str!("../../data/calibration.txt");

/// Checkerboard square sizes used to calibrate the blur estimator.
const BLUR_SQUARES: [usize; 3] = [24, 32, 40];
const CALIBRATION_SIDE: usize = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    blur_ratio: Vec<f64>,
    jpeg_blockiness: Vec<f64>,
}

fn blur_key(sigma: f64) -> String {
    format!("blur.ratio.{sigma:.1}")
}

fn jpeg_key(q: u8) -> String {
    format!("jpeg.blockiness.q{q}")
}

impl Calibration {
    /// The table shipped with the crate.
    pub fn builtin() -> &'static Calibration {
        static CELL: OnceLock<Calibration> = OnceLock::new();
        CELL.get_or_init(|| {
            Calibration::parse(BUILTIN_TEXT).expect("shipped calibration table is valid")
        })
    }

    /// `r(s)` for every entry of [`BLUR_GRID`].
    pub fn blur_ratios(&self) -> &[f64] {
        &self.blur_ratio
    }

    /// Mean blockiness at each of [`CALIBRATION_QUALITIES`].
    pub fn jpeg_blockiness(&self) -> &[f64] {
        &self.jpeg_blockiness
    }

    /// Recomputes both tables from the synthetic calibration set.
    pub fn generate() -> Result<Calibration> {
        let blur_ratio = BLUR_GRID
            .iter()
            .map(|&s| {
                let sum: f64 = BLUR_SQUARES
                    .iter()
                    .map(|&sq| {
                        let board = fixtures::checkerboard(
                            CALIBRATION_SIDE,
                            CALIBRATION_SIDE,
                            sq,
                            0.2,
                            0.8,
                        );
                        let n = CALIBRATION_SIDE;
                        let once = blur_plane(board.plane(0), n, n, s);
                        reblur_ratio(&once, n, n, None, REBLUR_SIGMA)
                    })
                    .sum();
                sum / BLUR_SQUARES.len() as f64
            })
            .collect();
        let images: Vec<_> = fixtures::NATURAL_SEEDS
            .iter()
            .map(|&seed| fixtures::natural(seed, CALIBRATION_SIDE, CALIBRATION_SIDE))
            .collect();
        let mut jpeg_blockiness = Vec::with_capacity(CALIBRATION_QUALITIES.len());
        for q in CALIBRATION_QUALITIES {
            let mut sum = 0.0;
            for img in &images {
                let decoded = jpeg::decode(&jpeg::encode(img, q)?)?.image;
                sum += blockiness(&decoded);
            }
            jpeg_blockiness.push(sum / images.len() as f64);
        }
        Calibration::new(blur_ratio, jpeg_blockiness)
    }

    pub fn new(blur_ratio: Vec<f64>, jpeg_blockiness: Vec<f64>) -> Result<Calibration> {
        if blur_ratio.len() != BLUR_GRID.len()
            || jpeg_blockiness.len() != CALIBRATION_QUALITIES.len()
        {
            return Err(Error::invalid(
                "calibration table has the wrong number of entries",
            ));
        }
        if blur_ratio
            .iter()
            .any(|r| !(r.is_finite() && (0.0..=1.0).contains(r)))
        {
            return Err(Error::invalid("blur ratios must lie in [0,1]"));
        }
        if blur_ratio.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("blur ratios must not decrease with width"));
        }
        if jpeg_blockiness.windows(2).any(|w| !(w[0] > w[1]))
            || jpeg_blockiness.iter().any(|b| !b.is_finite())
        {
            return Err(Error::invalid(
                "blockiness knots must strictly decrease with quality",
            ));
        }
        Ok(Calibration {
            blur_ratio,
            jpeg_blockiness,
        })
    }

    pub fn parse(text: &str) -> Result<Calibration> {
        let doc = KvDocument::parse_versioned(text, CALIBRATION_FORMAT, CALIBRATION_VERSION)?;
        let blur = BLUR_GRID
            .iter()
            .map(|&s| doc.require(&blur_key(s)))
            .collect::<Result<_>>()?;
        let jpeg = CALIBRATION_QUALITIES
            .iter()
            .map(|&q| doc.require(&jpeg_key(q)))
            .collect::<Result<_>>()?;
        Calibration::new(blur, jpeg)
    }

    pub fn to_text(&self) -> String {
        let mut doc = KvDocument::new(CALIBRATION_FORMAT, CALIBRATION_VERSION);
        for (&s, r) in BLUR_GRID.iter().zip(&self.blur_ratio) {
            doc.set(&blur_key(s), r);
        }
        for (&q, b) in CALIBRATION_QUALITIES.iter().zip(&self.jpeg_blockiness) {
            doc.set(&jpeg_key(q), b);
        }
        doc.to_text(
            "Estimator calibration. Regenerate with:\n  cargo run -p objrestore --example gen_calibration",
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_table_matches_generator() {
        let fresh = Calibration::generate().unwrap();
        let shipped = Calibration::builtin();
        for (a, b) in fresh.blur_ratio.iter().zip(&shipped.blur_ratio) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        for (a, b) in fresh.jpeg_blockiness.iter().zip(&shipped.jpeg_blockiness) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn text_round_trip() {
        let c = Calibration::builtin();
        assert_eq!(&Calibration::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn blur_ratios_follow_isolated_edge_law() {
        // Once the edge spans a few pixels, sampling stops mattering and
        // r(s) = s^2 / (s^2 + s0^2).
        let r = Calibration::builtin().blur_ratios();
        assert!(r.iter().all(|&v| v > 0.0 && v <= 1.0));
        assert!(r.windows(2).all(|w| w[0] <= w[1]));
        for (&s, &v) in BLUR_GRID.iter().zip(r).filter(|(&s, _)| s >= 1.0) {
            let law = s * s / (s * s + REBLUR_SIGMA * REBLUR_SIGMA);
            assert!((v - law).abs() < 0.01, "s={s}: {v} vs {law}");
        }
    }

    #[test]
    fn rejects_future_version() {
        let text = Calibration::builtin()
            .to_text()
            .replace("version = 1", "version = 2");
        assert!(Calibration::parse(&text).is_err());
    }
}
