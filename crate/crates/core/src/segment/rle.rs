//! Column-major run-length masks as exchanged by segmentation services.
//!
//! `size` is `[height, width]`; runs alternate starting with unset pixels.
//! `counts` is either a list of integers or the compact string form, where
//! each run is written in 5-bit groups offset by 48 and runs from the
//! fourth onwards are stored relative to the run two places earlier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::BinaryMask;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RleCounts {
    List(Vec<u64>),
    Compact(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    pub counts: RleCounts,
    pub size: [usize; 2],
}

fn protocol(msg: impl Into<String>) -> Error {
    Error::ExternalProtocol(msg.into())
}

/// Decodes the compact string form into run lengths.
pub fn decode_compact(s: &str) -> Result<Vec<u64>> {
    let bytes = s.as_bytes();
    let mut counts: Vec<i64> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0;
        loop {
            let b = *bytes
                .get(p)
                .ok_or_else(|| protocol("truncated RLE string"))?;
            if !(48..48 + 64).contains(&b) {
                return Err(protocol(format!("invalid RLE character {:?}", b as char)));
            }
            if k >= 12 {
                return Err(protocol("RLE run too long"));
            }
            let c = (b - 48) as i64;
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            k += 1;
            if c & 0x20 == 0 {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
        }
        if counts.len() > 2 {
            x = x
                .checked_add(counts[counts.len() - 2])
                .ok_or_else(|| protocol("RLE run overflow"))?;
        }
        counts.push(x);
    }
    counts
        .into_iter()
        .map(|c| u64::try_from(c).map_err(|_| protocol("negative RLE run")))
        .collect()
}

/// Encodes run lengths in the compact string form.
pub fn encode_compact(counts: &[u64]) -> String {
    let mut out = String::new();
    for (i, &c) in counts.iter().enumerate() {
        let mut x = c as i64;
        if i > 2 {
            x -= counts[i - 2] as i64;
        }
        loop {
            let mut c = (x & 0x1f) as u8;
            x >>= 5;
            let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                c |= 0x20;
            }
            out.push((c + 48) as char);
            if !more {
                break;
            }
        }
    }
    out
}

impl Rle {
    pub fn encode(mask: &BinaryMask) -> Rle {
        let (w, h) = (mask.width(), mask.height());
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u64;
        for x in 0..w {
            for y in 0..h {
                if mask.get(x, y) != current {
                    counts.push(run);
                    run = 0;
                    current = !current;
                }
                run += 1;
            }
        }
        counts.push(run);
        Rle {
            counts: RleCounts::List(counts),
            size: [h, w],
        }
    }

    pub fn decode(&self) -> Result<BinaryMask> {
        let [h, w] = self.size;
        let counts = match &self.counts {
            RleCounts::List(v) => v.clone(),
            RleCounts::Compact(s) => decode_compact(s)?,
        };
        let total: u64 = counts
            .iter()
            .try_fold(0u64, |a, &c| a.checked_add(c))
            .ok_or_else(|| protocol("RLE overflow"))?;
        if total != (w as u64) * (h as u64) {
            return Err(protocol(format!(
                "RLE covers {total} pixels, expected {}",
                w * h
            )));
        }
        let mut bits = vec![false; w * h];
        let mut pos = 0usize;
        for (i, &c) in counts.iter().enumerate() {
            let set = i % 2 == 1;
            for k in pos..pos + c as usize {
                if set {
                    let (x, y) = (k / h, k % h);
                    bits[y * w + x] = true;
                }
            }
            pos += c as usize;
        }
        BinaryMask::new(w, h, bits)
    }
}
