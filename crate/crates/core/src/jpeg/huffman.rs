//! Canonical Huffman tables (Annex C) for encoding and decoding.

use crate::error::{Error, Result};

/// Code lengths and symbols as carried in a DHT segment.
#[derive(Clone, Debug)]
pub struct HuffmanSpec {
    pub bits: [u8; 16],
    pub values: Vec<u8>,
}

impl HuffmanSpec {
    pub fn new(bits: [u8; 16], values: &[u8]) -> Self {
        HuffmanSpec {
            bits,
            values: values.to_vec(),
        }
    }

    /// Canonical code assignment: `(code, length)` per symbol in `values` order.
    fn codes(&self) -> Result<Vec<(u16, u8)>> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut code: u32 = 0;
        for (i, &count) in self.bits.iter().enumerate() {
            let len = i as u8 + 1;
            for _ in 0..count {
                if code >= (1 << len) {
                    return Err(Error::parse(0, "over-subscribed Huffman table"));
                }
                out.push((code as u16, len));
                code += 1;
            }
            code <<= 1;
        }
        Ok(out)
    }
}

/// Symbol to code lookup.
pub struct EncodeTable {
    codes: [(u16, u8); 256],
}

impl EncodeTable {
    pub fn new(spec: &HuffmanSpec) -> Self {
        let mut codes = [(0u16, 0u8); 256];
        for (&sym, code) in spec
            .values
            .iter()
            .zip(spec.codes().expect("standard tables are valid"))
        {
            codes[sym as usize] = code;
        }
        EncodeTable { codes }
    }

    #[inline]
    pub fn get(&self, symbol: u8) -> (u16, u8) {
        self.codes[symbol as usize]
    }
}

/// Decoder using per-length `maxcode` / `valptr` (Annex F.2.2.3).
#[derive(Clone, Debug)]
pub struct DecodeTable {
    mincode: [i32; 17],
    maxcode: [i32; 17],
    valptr: [usize; 17],
    values: Vec<u8>,
}

impl DecodeTable {
    pub fn new(spec: &HuffmanSpec) -> Result<Self> {
        let total: usize = spec.bits.iter().map(|&b| b as usize).sum();
        if total != spec.values.len() || total > 256 {
            return Err(Error::parse(0, "Huffman table symbol count mismatch"));
        }
        spec.codes()?;
        let mut mincode = [0i32; 17];
        let mut maxcode = [-1i32; 17];
        let mut valptr = [0usize; 17];
        let mut code = 0i32;
        let mut k = 0usize;
        for len in 1..=16 {
            let count = spec.bits[len - 1] as usize;
            if count > 0 {
                valptr[len] = k;
                mincode[len] = code;
                code += count as i32;
                k += count;
                maxcode[len] = code - 1;
            }
            code <<= 1;
        }
        Ok(DecodeTable {
            mincode,
            maxcode,
            valptr,
            values: spec.values.clone(),
        })
    }

    /// Decodes one symbol pulling bits from `next_bit`.
    pub fn decode(&self, mut next_bit: impl FnMut() -> Result<u32>) -> Result<u8> {
        let mut code = 0i32;
        for len in 1..=16 {
            code = (code << 1) | next_bit()? as i32;
            if code <= self.maxcode[len] {
                let idx = self.valptr[len] + (code - self.mincode[len]) as usize;
                return self
                    .values
                    .get(idx)
                    .copied()
                    .ok_or_else(|| Error::parse(0, "Huffman symbol index out of range"));
            }
        }
        Err(Error::parse(0, "invalid Huffman code"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jpeg::tables::*;

    #[test]
    fn encode_decode_every_symbol() {
        let spec = HuffmanSpec::new(AC_LUMA_BITS, &AC_LUMA_VALUES);
        let enc = EncodeTable::new(&spec);
        let dec = DecodeTable::new(&spec).unwrap();
        for &sym in &AC_LUMA_VALUES {
            let (code, len) = enc.get(sym);
            let mut i = len;
            let got = dec
                .decode(|| {
                    i -= 1;
                    Ok(((code >> i) & 1) as u32)
                })
                .unwrap();
            assert_eq!(got, sym);
        }
    }

    #[test]
    fn oversubscribed_is_rejected() {
        let mut bits = [0u8; 16];
        bits[0] = 3;
        assert!(DecodeTable::new(&HuffmanSpec::new(bits, &[1, 2, 3])).is_err());
    }
}
