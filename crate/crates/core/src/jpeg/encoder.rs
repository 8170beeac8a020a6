use super::dct;
use super::huffman::{EncodeTable, HuffmanSpec};
use super::tables::*;
use super::{flatten, quant_tables_for_quality, QuantTables};
use crate::color::{convert_colorspace, rgb_to_ycbcr};
use crate::error::{Error, Result};
use crate::image::{ColorSpace, ImageBuffer};

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u32,
}

impl BitWriter {
    fn new(out: Vec<u8>) -> Self {
        BitWriter {
            out,
            acc: 0,
            nbits: 0,
        }
    }

    fn put(&mut self, code: u32, len: u8) {
        if len == 0 {
            return;
        }
        self.acc = (self.acc << len) | (code & ((1 << len) - 1));
        self.nbits += len as u32;
        while self.nbits >= 8 {
            let byte = (self.acc >> (self.nbits - 8)) as u8;
            self.out.push(byte);
            if byte == 0xFF {
                self.out.push(0x00);
            }
            self.nbits -= 8;
            self.acc &= (1 << self.nbits) - 1;
        }
    }

    /// Pads the final byte with one bits.
    fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits as u8;
            self.put((1 << pad) - 1, pad);
        }
        self.out
    }
}

fn category(v: i32) -> u8 {
    (32 - v.unsigned_abs().leading_zeros()) as u8
}

fn value_bits(v: i32, cat: u8) -> u32 {
    if v < 0 {
        (v - 1) as u32 & ((1u32 << cat) - 1)
    } else {
        v as u32
    }
}

struct ComponentCoder {
    dc: EncodeTable,
    ac: EncodeTable,
    quant: [u16; 64],
    pred: i32,
}

impl ComponentCoder {
    fn encode_block(&mut self, w: &mut BitWriter, block: &[f64; 64]) {
        let coef = dct::forward(block);
        let mut zz = [0i32; 64];
        for (k, &n) in UNZIGZAG.iter().enumerate() {
            zz[k] = (coef[n] / self.quant[n] as f64).round() as i32;
        }
        let diff = zz[0] - self.pred;
        self.pred = zz[0];
        let cat = category(diff);
        let (code, len) = self.dc.get(cat);
        w.put(code as u32, len);
        w.put(value_bits(diff, cat), cat);

        let mut run = 0u8;
        for &v in &zz[1..] {
            if v == 0 {
                run += 1;
                continue;
            }
            while run >= 16 {
                let (code, len) = self.ac.get(0xF0);
                w.put(code as u32, len);
                run -= 16;
            }
            let cat = category(v);
            let (code, len) = self.ac.get((run << 4) | cat);
            w.put(code as u32, len);
            w.put(value_bits(v, cat), cat);
            run = 0;
        }
        if run > 0 {
            let (code, len) = self.ac.get(0x00);
            w.put(code as u32, len);
        }
    }
}

fn push_segment(out: &mut Vec<u8>, marker: u8, payload: &[u8]) {
    out.extend_from_slice(&[0xFF, marker]);
    out.extend_from_slice(&((payload.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(payload);
}

fn dht_payload(class: u8, id: u8, bits: &[u8; 16], values: &[u8]) -> Vec<u8> {
    let mut p = vec![(class << 4) | id];
    p.extend_from_slice(bits);
    p.extend_from_slice(values);
    p
}

/// Baseline 4:4:4 encode at an IJG quality in `1..=100`.
pub fn encode(img: &ImageBuffer, quality: u8) -> Result<Vec<u8>> {
    let tables = quant_tables_for_quality(quality)?;
    encode_with_tables(img, &tables)
}

/// Baseline 4:4:4 encode with explicit tables (8-bit precision entries).
pub fn encode_with_tables(img: &ImageBuffer, tables: &QuantTables) -> Result<Vec<u8>> {
    if img.width() < 8 || img.height() < 8 {
        return Err(Error::invalid("JPEG encode needs at least 8x8 pixels"));
    }
    if img.width() > 65535 || img.height() > 65535 {
        return Err(Error::invalid("JPEG dimensions exceed 65535"));
    }
    let luma = flatten(&tables.luma);
    let chroma = flatten(&tables.chroma);
    if luma
        .iter()
        .chain(chroma.iter())
        .any(|&v| !(1..=255).contains(&v))
    {
        return Err(Error::invalid("quantisation entries must lie in [1,255]"));
    }
    let img = match img.colorspace() {
        ColorSpace::Srgb => img.clone(),
        _ => convert_colorspace(img, ColorSpace::Srgb)?,
    };
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let gray = img.channels() == 1;

    // 8-bit samples first, as a real capture pipeline would hand them over.
    let bytes = img.to_interleaved_u8();
    let planes: Vec<Vec<f64>> = if gray {
        vec![bytes.iter().map(|&b| b as f64).collect()]
    } else {
        let mut y = vec![0.0; n];
        let mut cb = vec![0.0; n];
        let mut cr = vec![0.0; n];
        for i in 0..n {
            let (r, g, b) = (
                bytes[3 * i] as f64 / 255.0,
                bytes[3 * i + 1] as f64 / 255.0,
                bytes[3 * i + 2] as f64 / 255.0,
            );
            let (yy, cbb, crr) = rgb_to_ycbcr(r, g, b);
            y[i] = yy * 255.0;
            cb[i] = cbb * 255.0;
            cr[i] = crr * 255.0;
        }
        vec![y, cb, cr]
    };

    let mut out = vec![0xFF, 0xD8];
    push_segment(
        &mut out,
        0xE0,
        &[b'J', b'F', b'I', b'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0],
    );
    let mut dqt = Vec::with_capacity(130);
    for (id, table) in [(0u8, &luma), (1u8, &chroma)] {
        dqt.push(id);
        dqt.extend(UNZIGZAG.iter().map(|&nidx| table[nidx] as u8));
    }
    push_segment(&mut out, 0xDB, &dqt);

    let ncomp = planes.len() as u8;
    let mut sof = vec![8];
    sof.extend_from_slice(&(h as u16).to_be_bytes());
    sof.extend_from_slice(&(w as u16).to_be_bytes());
    sof.push(ncomp);
    for c in 0..ncomp {
        sof.extend_from_slice(&[c + 1, 0x11, if c == 0 { 0 } else { 1 }]);
    }
    push_segment(&mut out, 0xC0, &sof);

    push_segment(
        &mut out,
        0xC4,
        &dht_payload(0, 0, &DC_LUMA_BITS, &DC_VALUES),
    );
    push_segment(
        &mut out,
        0xC4,
        &dht_payload(1, 0, &AC_LUMA_BITS, &AC_LUMA_VALUES),
    );
    if !gray {
        push_segment(
            &mut out,
            0xC4,
            &dht_payload(0, 1, &DC_CHROMA_BITS, &DC_VALUES),
        );
        push_segment(
            &mut out,
            0xC4,
            &dht_payload(1, 1, &AC_CHROMA_BITS, &AC_CHROMA_VALUES),
        );
    }

    let mut sos = vec![ncomp];
    for c in 0..ncomp {
        sos.extend_from_slice(&[c + 1, if c == 0 { 0x00 } else { 0x11 }]);
    }
    sos.extend_from_slice(&[0, 63, 0]);
    push_segment(&mut out, 0xDA, &sos);

    let luma_coder = || ComponentCoder {
        dc: EncodeTable::new(&HuffmanSpec::new(DC_LUMA_BITS, &DC_VALUES)),
        ac: EncodeTable::new(&HuffmanSpec::new(AC_LUMA_BITS, &AC_LUMA_VALUES)),
        quant: luma,
        pred: 0,
    };
    let chroma_coder = || ComponentCoder {
        dc: EncodeTable::new(&HuffmanSpec::new(DC_CHROMA_BITS, &DC_VALUES)),
        ac: EncodeTable::new(&HuffmanSpec::new(AC_CHROMA_BITS, &AC_CHROMA_VALUES)),
        quant: chroma,
        pred: 0,
    };
    let mut coders: Vec<ComponentCoder> = (0..planes.len())
        .map(|c| if c == 0 { luma_coder() } else { chroma_coder() })
        .collect();

    let mut writer = BitWriter::new(out);
    let mut block = [0.0; 64];
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            for (plane, coder) in planes.iter().zip(coders.iter_mut()) {
                for y in 0..8 {
                    let sy = (by + y).min(h - 1);
                    for x in 0..8 {
                        let sx = (bx + x).min(w - 1);
                        block[y * 8 + x] = plane[sy * w + sx] - 128.0;
                    }
                }
                coder.encode_block(&mut writer, &block);
            }
        }
    }
    let mut out = writer.finish();
    out.extend_from_slice(&[0xFF, 0xD9]);
    Ok(out)
}
