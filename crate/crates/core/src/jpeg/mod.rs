//! Minimal baseline JPEG codec.
//!
//! The encoder writes sequential Huffman-coded JFIF with 4:4:4 sampling and
//! the Annex K Huffman tables. The decoder accepts any baseline (SOF0) or
//! extended-sequential 8-bit (SOF1) stream with up to four components,
//! arbitrary sampling factors and restart intervals, and returns the DQT
//! tables exactly as stored in the stream.

pub(crate) mod dct;
mod decoder;
mod encoder;
mod huffman;
pub(crate) mod tables;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use decoder::{decode, read_quant_tables, DecodedJpeg};
pub use encoder::{encode, encode_with_tables};

/// One 8x8 quantisation table in natural (row-major) order.
pub type QuantTable = [[u16; 8]; 8];

/// Luma and chroma quantisation tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantTables {
    pub luma: QuantTable,
    pub chroma: QuantTable,
}

impl QuantTables {
    pub fn luma_flat(&self) -> [u16; 64] {
        flatten(&self.luma)
    }

    pub fn chroma_flat(&self) -> [u16; 64] {
        flatten(&self.chroma)
    }

    pub fn mean_luma(&self) -> f64 {
        self.luma_flat().iter().map(|&v| v as f64).sum::<f64>() / 64.0
    }
}

pub(crate) fn flatten(t: &QuantTable) -> [u16; 64] {
    let mut out = [0u16; 64];
    for (i, v) in t.iter().flatten().enumerate() {
        out[i] = *v;
    }
    out
}

pub(crate) fn unflatten(flat: &[u16; 64]) -> QuantTable {
    let mut out = [[0u16; 8]; 8];
    for (i, &v) in flat.iter().enumerate() {
        out[i / 8][i % 8] = v;
    }
    out
}

/// IJG percentage scaling for a quality in `1..=100`.
pub fn quality_scale(quality: u8) -> u32 {
    let q = quality as u32;
    if q < 50 {
        5000 / q
    } else {
        200 - 2 * q
    }
}

fn scale_table(base: &[u16; 64], scale: u32) -> QuantTable {
    let mut flat = [0u16; 64];
    for (o, &b) in flat.iter_mut().zip(base) {
        *o = ((b as u32 * scale + 50) / 100).clamp(1, 255) as u16;
    }
    unflatten(&flat)
}

/// Annex K base tables scaled by the IJG quality rule.
pub fn quant_tables_for_quality(quality: u8) -> Result<QuantTables> {
    if !(1..=100).contains(&quality) {
        return Err(Error::invalid(format!(
            "JPEG quality {quality} outside [1,100]"
        )));
    }
    let scale = quality_scale(quality);
    Ok(QuantTables {
        luma: scale_table(&tables::BASE_LUMA, scale),
        chroma: scale_table(&tables::BASE_CHROMA, scale),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quality_fifty_is_base() {
        let t = quant_tables_for_quality(50).unwrap();
        assert_eq!(t.luma_flat(), tables::BASE_LUMA);
        assert_eq!(t.chroma_flat(), tables::BASE_CHROMA);
    }

    #[test]
    fn quality_hundred_is_all_ones() {
        let t = quant_tables_for_quality(100).unwrap();
        assert!(t
            .luma_flat()
            .iter()
            .chain(t.chroma_flat().iter())
            .all(|&v| v == 1));
    }

    #[test]
    fn quality_ten_hand_value() {
        // scale = 5000 / 10 = 500; (16 * 500 + 50) / 100 = 80
        assert_eq!(quant_tables_for_quality(10).unwrap().luma[0][0], 80);
    }

    #[test]
    fn out_of_range_quality() {
        assert!(quant_tables_for_quality(0).is_err());
        assert!(quant_tables_for_quality(101).is_err());
    }

    #[test]
    fn entries_non_increasing_in_quality() {
        let mut prev = quant_tables_for_quality(1).unwrap();
        for q in 2..=100 {
            let t = quant_tables_for_quality(q).unwrap();
            for (a, b) in t.luma_flat().iter().zip(prev.luma_flat().iter()) {
                assert!(a <= b, "luma increased at q={q}");
            }
            for (a, b) in t.chroma_flat().iter().zip(prev.chroma_flat().iter()) {
                assert!(a <= b, "chroma increased at q={q}");
            }
            assert!(t.luma_flat().iter().all(|&v| (1..=255).contains(&v)));
            prev = t;
        }
    }
}
