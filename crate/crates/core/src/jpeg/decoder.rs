use super::dct;
use super::huffman::{DecodeTable, HuffmanSpec};
use super::tables::UNZIGZAG;
use super::{unflatten, QuantTables};
use crate::color::ycbcr_to_rgb;
use crate::error::{Error, Result};
use crate::image::{ColorSpace, ImageBuffer};
use crate::io::MAX_PIXELS;

/// Pixels plus the quantisation tables found in the stream.
#[derive(Clone, Debug)]
pub struct DecodedJpeg {
    pub image: ImageBuffer,
    pub tables: QuantTables,
}

#[derive(Clone, Debug)]
struct Component {
    id: u8,
    h: usize,
    v: usize,
    tq: usize,
    /// Width and height of the sample plane in blocks (MCU-padded).
    blocks_w: usize,
    blocks_h: usize,
    samples: Vec<u8>,
    decoded: bool,
}

#[derive(Clone, Debug)]
struct Frame {
    width: usize,
    height: usize,
    hmax: usize,
    vmax: usize,
    mcus_x: usize,
    mcus_y: usize,
    components: Vec<Component>,
}

#[derive(Default)]
struct State {
    qt: [Option<[u16; 64]>; 4],
    dc: [Option<DecodeTable>; 4],
    ac: [Option<DecodeTable>; 4],
    frame: Option<Frame>,
    restart_interval: usize,
    scans: usize,
}

impl State {
    fn expected_marker(&self) -> &'static str {
        if self.frame.is_none() {
            "SOF0"
        } else if self.scans == 0 {
            "SOS"
        } else {
            "EOI"
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u8(&mut self, what: &str) -> Result<u8> {
        let b = *self
            .data
            .get(self.pos)
            .ok_or_else(|| Error::parse(self.pos, format!("truncated stream: missing {what}")))?;
        self.pos += 1;
        Ok(b)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(((self.u8(what)? as u16) << 8) | self.u8(what)? as u16)
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::parse(
                self.data.len(),
                format!("truncated stream: {what} segment cut short"),
            ));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Next marker code, skipping fill bytes.
    fn marker(&mut self, expected: &str) -> Result<u8> {
        let start = self.pos;
        let first = self.u8(&format!("{expected} marker"))?;
        if first != 0xFF {
            return Err(Error::parse(
                start,
                format!("expected marker, found 0x{first:02X}"),
            ));
        }
        loop {
            let b = self.u8(&format!("{expected} marker"))?;
            if b != 0xFF {
                return Ok(b);
            }
        }
    }

    fn segment(&mut self, name: &str) -> Result<&'a [u8]> {
        let len = self.u16(&format!("{name} length"))? as usize;
        if len < 2 {
            return Err(Error::parse(
                self.pos - 2,
                format!("{name} length {len} too small"),
            ));
        }
        self.take(len - 2, name)
    }
}

/// Entropy-coded segment reader with byte un-stuffing.
struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u32,
    nbits: u32,
    /// Set once a marker interrupts the entropy data; zeros are fed afterwards.
    at_marker: bool,
    padded_bits: u32,
}

impl<'a> BitReader<'a> {
    fn new(data: &'a [u8], pos: usize) -> Self {
        BitReader {
            data,
            pos,
            acc: 0,
            nbits: 0,
            at_marker: false,
            padded_bits: 0,
        }
    }

    fn fill(&mut self) -> Result<()> {
        if self.at_marker {
            self.padded_bits += 8;
            if self.padded_bits > 32 {
                return Err(Error::parse(
                    self.pos,
                    "premature end of entropy-coded data",
                ));
            }
            self.acc <<= 8;
            self.nbits += 8;
            return Ok(());
        }
        let b = *self.data.get(self.pos).ok_or_else(|| {
            Error::parse(
                self.pos,
                "truncated stream: missing EOI marker after scan data",
            )
        })?;
        if b == 0xFF {
            let next = *self.data.get(self.pos + 1).ok_or_else(|| {
                Error::parse(
                    self.pos,
                    "truncated stream: missing EOI marker after scan data",
                )
            })?;
            if next == 0x00 {
                self.pos += 2;
            } else {
                self.at_marker = true;
                return self.fill();
            }
        } else {
            self.pos += 1;
        }
        self.acc = (self.acc << 8) | b as u32;
        self.nbits += 8;
        Ok(())
    }

    fn bit(&mut self) -> Result<u32> {
        if self.nbits == 0 {
            self.fill()?;
        }
        self.nbits -= 1;
        Ok((self.acc >> self.nbits) & 1)
    }

    fn bits(&mut self, n: u8) -> Result<u32> {
        let mut v = 0;
        for _ in 0..n {
            v = (v << 1) | self.bit()?;
        }
        Ok(v)
    }

    fn receive_extend(&mut self, s: u8) -> Result<i32> {
        if s == 0 {
            return Ok(0);
        }
        let v = self.bits(s)? as i32;
        Ok(if v < 1 << (s - 1) {
            v - (1 << s) + 1
        } else {
            v
        })
    }

    /// Drops buffered bits and consumes an RSTn marker.
    fn restart(&mut self, expected: u8) -> Result<()> {
        self.acc = 0;
        self.nbits = 0;
        self.at_marker = false;
        self.padded_bits = 0;
        while self.pos < self.data.len() && self.data[self.pos] == 0xFF {
            match self.data.get(self.pos + 1) {
                Some(0xFF) => self.pos += 1,
                Some(&m) if m == 0xD0 + expected => {
                    self.pos += 2;
                    return Ok(());
                }
                _ => break,
            }
        }
        Err(Error::parse(
            self.pos,
            format!("missing RST{expected} marker"),
        ))
    }
}

fn parse_dqt(seg: &[u8], offset: usize, st: &mut State) -> Result<()> {
    let mut i = 0;
    while i < seg.len() {
        let pq = seg[i] >> 4;
        let tq = (seg[i] & 0x0F) as usize;
        if tq > 3 {
            return Err(Error::parse(
                offset + i,
                format!("DQT table id {tq} out of range"),
            ));
        }
        if pq > 1 {
            return Err(Error::parse(
                offset + i,
                format!("DQT precision {pq} invalid"),
            ));
        }
        i += 1;
        let need = if pq == 0 { 64 } else { 128 };
        if i + need > seg.len() {
            return Err(Error::parse(offset + i, "DQT segment cut short"));
        }
        let mut natural = [0u16; 64];
        for (k, &n) in UNZIGZAG.iter().enumerate() {
            let v = if pq == 0 {
                seg[i + k] as u16
            } else {
                u16::from_be_bytes([seg[i + 2 * k], seg[i + 2 * k + 1]])
            };
            if v == 0 {
                return Err(Error::parse(offset + i, "DQT entry of zero"));
            }
            natural[n] = v;
        }
        st.qt[tq] = Some(natural);
        i += need;
    }
    Ok(())
}

fn parse_dht(seg: &[u8], offset: usize, st: &mut State) -> Result<()> {
    let mut i = 0;
    while i < seg.len() {
        let class = seg[i] >> 4;
        let id = (seg[i] & 0x0F) as usize;
        if class > 1 || id > 3 {
            return Err(Error::parse(offset + i, "DHT class or id out of range"));
        }
        if i + 17 > seg.len() {
            return Err(Error::parse(offset + i, "DHT segment cut short"));
        }
        let mut bits = [0u8; 16];
        bits.copy_from_slice(&seg[i + 1..i + 17]);
        let count: usize = bits.iter().map(|&b| b as usize).sum();
        i += 17;
        if i + count > seg.len() {
            return Err(Error::parse(offset + i, "DHT symbols cut short"));
        }
        let table =
            DecodeTable::new(&HuffmanSpec::new(bits, &seg[i..i + count])).map_err(|e| match e {
                Error::Parse { message, .. } => Error::parse(offset + i, message),
                other => other,
            })?;
        if class == 0 {
            st.dc[id] = Some(table);
        } else {
            st.ac[id] = Some(table);
        }
        i += count;
    }
    Ok(())
}

fn parse_sof(seg: &[u8], offset: usize, st: &mut State) -> Result<()> {
    if st.frame.is_some() {
        return Err(Error::parse(offset, "multiple frame headers"));
    }
    if seg.len() < 6 {
        return Err(Error::parse(offset, "SOF segment cut short"));
    }
    if seg[0] != 8 {
        return Err(Error::UnsupportedFormat(format!(
            "{}-bit sample precision",
            seg[0]
        )));
    }
    let height = u16::from_be_bytes([seg[1], seg[2]]) as usize;
    let width = u16::from_be_bytes([seg[3], seg[4]]) as usize;
    let n = seg[5] as usize;
    if width == 0 || height == 0 {
        return Err(Error::UnsupportedFormat(
            "zero or DNL-defined dimensions".into(),
        ));
    }
    if width * height > MAX_PIXELS {
        return Err(Error::invalid("JPEG dimensions exceed the decode limit"));
    }
    if !(n == 1 || n == 3) {
        return Err(Error::UnsupportedFormat(format!("{n} colour components")));
    }
    if seg.len() < 6 + 3 * n {
        return Err(Error::parse(offset, "SOF component list cut short"));
    }
    let mut comps = Vec::with_capacity(n);
    for c in 0..n {
        let b = &seg[6 + 3 * c..9 + 3 * c];
        let (h, v) = ((b[1] >> 4) as usize, (b[1] & 0x0F) as usize);
        if !(1..=4).contains(&h) || !(1..=4).contains(&v) {
            return Err(Error::parse(
                offset + 6 + 3 * c,
                "sampling factor out of range",
            ));
        }
        if b[2] > 3 {
            return Err(Error::parse(
                offset + 6 + 3 * c,
                "quantisation table id out of range",
            ));
        }
        if comps.iter().any(|k: &Component| k.id == b[0]) {
            return Err(Error::parse(offset + 6 + 3 * c, "duplicate component id"));
        }
        comps.push(Component {
            id: b[0],
            h,
            v,
            tq: b[2] as usize,
            blocks_w: 0,
            blocks_h: 0,
            samples: Vec::new(),
            decoded: false,
        });
    }
    let hmax = comps.iter().map(|c| c.h).max().unwrap_or(1);
    let vmax = comps.iter().map(|c| c.v).max().unwrap_or(1);
    let mcus_x = width.div_ceil(8 * hmax);
    let mcus_y = height.div_ceil(8 * vmax);
    for c in &mut comps {
        c.blocks_w = mcus_x * c.h;
        c.blocks_h = mcus_y * c.v;
    }
    st.frame = Some(Frame {
        width,
        height,
        hmax,
        vmax,
        mcus_x,
        mcus_y,
        components: comps,
    });
    Ok(())
}

struct ScanComponent {
    index: usize,
    dc: usize,
    ac: usize,
}

fn decode_block(
    bits: &mut BitReader<'_>,
    dc: &DecodeTable,
    ac: &DecodeTable,
    quant: &[u16; 64],
    pred: &mut i32,
) -> Result<[f64; 64]> {
    let mut coef = [0.0f64; 64];
    let t = dc.decode(|| bits.bit())?;
    if t > 11 {
        return Err(Error::parse(
            bits.pos,
            format!("DC magnitude category {t} invalid"),
        ));
    }
    *pred = pred.wrapping_add(bits.receive_extend(t)?);
    coef[0] = *pred as f64 * quant[0] as f64;
    let mut k = 1;
    while k < 64 {
        let rs = ac.decode(|| bits.bit())?;
        let (r, s) = ((rs >> 4) as usize, rs & 0x0F);
        if s == 0 {
            if r == 15 {
                k += 16;
                continue;
            }
            break;
        }
        k += r;
        if k > 63 {
            return Err(Error::parse(bits.pos, "AC coefficient index past 63"));
        }
        if s > 10 {
            return Err(Error::parse(
                bits.pos,
                format!("AC magnitude category {s} invalid"),
            ));
        }
        let n = UNZIGZAG[k];
        coef[n] = bits.receive_extend(s)? as f64 * quant[n] as f64;
        k += 1;
    }
    Ok(coef)
}

fn store_block(comp: &mut Component, bx: usize, by: usize, coef: &[f64; 64]) {
    let px = dct::inverse(coef);
    let stride = comp.blocks_w * 8;
    for y in 0..8 {
        for x in 0..8 {
            comp.samples[(by * 8 + y) * stride + bx * 8 + x] =
                (px[y * 8 + x] + 128.0).round().clamp(0.0, 255.0) as u8;
        }
    }
}

/// Decodes one scan starting at `pos`; returns the position after the entropy data.
fn decode_scan(
    data: &[u8],
    seg: &[u8],
    seg_offset: usize,
    pos: usize,
    st: &mut State,
) -> Result<usize> {
    let frame = st
        .frame
        .as_mut()
        .ok_or_else(|| Error::parse(seg_offset, "SOS before frame header (missing SOF0 marker)"))?;
    if seg.is_empty() {
        return Err(Error::parse(seg_offset, "SOS segment empty"));
    }
    let ns = seg[0] as usize;
    if ns == 0 || ns > 4 || seg.len() < 1 + 2 * ns + 3 {
        return Err(Error::parse(seg_offset, "SOS component list malformed"));
    }
    let mut scan = Vec::with_capacity(ns);
    for i in 0..ns {
        let id = seg[1 + 2 * i];
        let tables = seg[2 + 2 * i];
        let index = frame
            .components
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| {
                Error::parse(seg_offset, format!("SOS references unknown component {id}"))
            })?;
        let (dc, ac) = ((tables >> 4) as usize, (tables & 0x0F) as usize);
        if dc > 3 || ac > 3 || st.dc[dc].is_none() || st.ac[ac].is_none() {
            return Err(Error::parse(
                seg_offset,
                "SOS references an undefined Huffman table (missing DHT marker)",
            ));
        }
        if st.qt[frame.components[index].tq].is_none() {
            return Err(Error::parse(
                seg_offset,
                "component references an undefined quantisation table (missing DQT marker)",
            ));
        }
        if frame.components[index].decoded {
            return Err(Error::UnsupportedFormat(
                "component coded in more than one scan (progressive?)".into(),
            ));
        }
        scan.push(ScanComponent { index, dc, ac });
    }
    let tail = &seg[1 + 2 * ns..];
    if tail[0] != 0 || tail[1] != 63 || tail[2] != 0 {
        return Err(Error::UnsupportedFormat(
            "spectral selection or successive approximation".into(),
        ));
    }
    let blocks_per_mcu: usize = scan
        .iter()
        .map(|s| frame.components[s.index].h * frame.components[s.index].v)
        .sum();
    if ns > 1 && blocks_per_mcu > 10 {
        return Err(Error::parse(seg_offset, "more than 10 blocks per MCU"));
    }
    for s in &scan {
        let c = &mut frame.components[s.index];
        c.samples = vec![0u8; c.blocks_w * 8 * c.blocks_h * 8];
    }

    let mut bits = BitReader::new(data, pos);
    let mut preds = vec![0i32; ns];
    let restart = st.restart_interval;
    let mut units = 0usize;
    let mut rst_index = 0u8;

    let (units_x, units_y) = if ns == 1 {
        let c = &frame.components[scan[0].index];
        (
            (frame.width * c.h).div_ceil(8 * frame.hmax),
            (frame.height * c.v).div_ceil(8 * frame.vmax),
        )
    } else {
        (frame.mcus_x, frame.mcus_y)
    };

    for uy in 0..units_y {
        for ux in 0..units_x {
            if restart > 0 && units > 0 && units.is_multiple_of(restart) {
                bits.restart(rst_index)?;
                rst_index = (rst_index + 1) % 8;
                preds.iter_mut().for_each(|p| *p = 0);
            }
            for (si, s) in scan.iter().enumerate() {
                let comp = &mut frame.components[s.index];
                let quant = st.qt[comp.tq].as_ref().expect("checked above");
                let dc = st.dc[s.dc].as_ref().expect("checked above");
                let ac = st.ac[s.ac].as_ref().expect("checked above");
                if ns == 1 {
                    let coef = decode_block(&mut bits, dc, ac, quant, &mut preds[si])?;
                    store_block(comp, ux, uy, &coef);
                } else {
                    for v in 0..comp.v {
                        for h in 0..comp.h {
                            let coef = decode_block(&mut bits, dc, ac, quant, &mut preds[si])?;
                            store_block(comp, ux * comp.h + h, uy * comp.v + v, &coef);
                        }
                    }
                }
            }
            units += 1;
        }
    }
    for s in &scan {
        frame.components[s.index].decoded = true;
    }
    st.scans += 1;

    // Skip to the marker that ends the entropy-coded segment.
    let mut p = bits.pos;
    loop {
        if p + 1 >= data.len() {
            return Err(Error::parse(
                data.len(),
                "truncated stream: missing EOI marker after scan data",
            ));
        }
        if data[p] == 0xFF
            && data[p + 1] != 0x00
            && !(0xD0..=0xD7).contains(&data[p + 1])
            && data[p + 1] != 0xFF
        {
            return Ok(p);
        }
        p += 1;
    }
}

fn assemble(st: &State) -> Result<ImageBuffer> {
    let frame = st.frame.as_ref().expect("frame present when assembling");
    if let Some(c) = frame.components.iter().find(|c| !c.decoded) {
        return Err(Error::parse(
            0,
            format!("component {} never coded (missing SOS marker)", c.id),
        ));
    }
    let (w, h) = (frame.width, frame.height);
    let n = w * h;
    let sample = |c: &Component, x: usize, y: usize| -> f64 {
        let sx = x * c.h / frame.hmax;
        let sy = y * c.v / frame.vmax;
        c.samples[sy * c.blocks_w * 8 + sx] as f64
    };
    if frame.components.len() == 1 {
        let c = &frame.components[0];
        let mut plane = Vec::with_capacity(n);
        for y in 0..h {
            for x in 0..w {
                plane.push(sample(c, x, y) / 255.0);
            }
        }
        return ImageBuffer::from_planes(w, h, ColorSpace::Srgb, vec![plane]);
    }
    let mut planes = vec![vec![0.0; n]; 3];
    let [yc, cbc, crc] = [
        &frame.components[0],
        &frame.components[1],
        &frame.components[2],
    ];
    for y in 0..h {
        for x in 0..w {
            let (r, g, b) = ycbcr_to_rgb(
                sample(yc, x, y) / 255.0,
                sample(cbc, x, y) / 255.0,
                sample(crc, x, y) / 255.0,
            );
            let i = y * w + x;
            planes[0][i] = (r * 255.0).round().clamp(0.0, 255.0) / 255.0;
            planes[1][i] = (g * 255.0).round().clamp(0.0, 255.0) / 255.0;
            planes[2][i] = (b * 255.0).round().clamp(0.0, 255.0) / 255.0;
        }
    }
    ImageBuffer::from_planes(w, h, ColorSpace::Srgb, planes)
}

fn tables_of(st: &State) -> Result<QuantTables> {
    let (luma_id, chroma_id) = match &st.frame {
        Some(f) => (
            f.components[0].tq,
            f.components
                .get(1)
                .map(|c| c.tq)
                .unwrap_or(if st.qt[1].is_some() {
                    1
                } else {
                    f.components[0].tq
                }),
        ),
        None => (0, if st.qt[1].is_some() { 1 } else { 0 }),
    };
    let luma = st.qt[luma_id]
        .ok_or_else(|| Error::parse(0, "no luma quantisation table (missing DQT marker)"))?;
    let chroma = st.qt[chroma_id].unwrap_or(luma);
    Ok(QuantTables {
        luma: unflatten(&luma),
        chroma: unflatten(&chroma),
    })
}

fn run(bytes: &[u8], headers_only: bool) -> Result<(State, Option<ImageBuffer>)> {
    let mut r = Reader {
        data: bytes,
        pos: 0,
    };
    let soi = r.u16("SOI marker")?;
    if soi != 0xFFD8 {
        return Err(Error::parse(0, "missing SOI marker"));
    }
    let mut st = State::default();
    loop {
        let marker_pos = r.pos;
        let m = r.marker(st.expected_marker())?;
        match m {
            0xD9 => {
                if st.frame.is_none() {
                    return Err(Error::parse(
                        marker_pos,
                        "EOI before frame header (missing SOF0 marker)",
                    ));
                }
                if st.scans == 0 {
                    if headers_only {
                        return Ok((st, None));
                    }
                    return Err(Error::parse(
                        marker_pos,
                        "EOI before any scan (missing SOS marker)",
                    ));
                }
                let img = assemble(&st)?;
                return Ok((st, Some(img)));
            }
            0xC0 | 0xC1 => {
                let off = r.pos;
                let seg = r.segment("SOF")?;
                parse_sof(seg, off, &mut st)?;
            }
            0xC2 | 0xC6 | 0xCA | 0xCE => {
                return Err(Error::UnsupportedFormat("progressive JPEG".into()));
            }
            0xC3 | 0xC7 | 0xCB | 0xCF => {
                return Err(Error::UnsupportedFormat("lossless JPEG".into()));
            }
            0xC5 => return Err(Error::UnsupportedFormat("hierarchical JPEG".into())),
            0xC9 | 0xCD => return Err(Error::UnsupportedFormat("arithmetic-coded JPEG".into())),
            0xCC => {
                return Err(Error::UnsupportedFormat(
                    "arithmetic coding conditioning (DAC)".into(),
                ))
            }
            0xC4 => {
                let off = r.pos;
                let seg = r.segment("DHT")?;
                parse_dht(seg, off, &mut st)?;
            }
            0xDB => {
                let off = r.pos;
                let seg = r.segment("DQT")?;
                parse_dqt(seg, off, &mut st)?;
            }
            0xDD => {
                let seg = r.segment("DRI")?;
                if seg.len() < 2 {
                    return Err(Error::parse(r.pos, "DRI segment cut short"));
                }
                st.restart_interval = u16::from_be_bytes([seg[0], seg[1]]) as usize;
            }
            0xDA => {
                let off = r.pos;
                let seg = r.segment("SOS")?;
                if headers_only {
                    return Ok((st, None));
                }
                r.pos = decode_scan(bytes, seg, off, r.pos, &mut st)?;
            }
            0xE0..=0xEF | 0xFE => {
                r.segment("APPn/COM")?;
            }
            0xD0..=0xD7 => {}
            0x01 => {}
            other => {
                return Err(Error::parse(
                    marker_pos,
                    format!("unexpected marker 0xFF{other:02X}"),
                ));
            }
        }
    }
}

/// Decodes a baseline JPEG.
pub fn decode(bytes: &[u8]) -> Result<DecodedJpeg> {
    let (st, img) = run(bytes, false)?;
    let image = img.expect("full decode yields an image");
    Ok(DecodedJpeg {
        tables: tables_of(&st)?,
        image,
    })
}

/// Parses only the headers up to the first scan and returns the DQT tables.
pub fn read_quant_tables(bytes: &[u8]) -> Result<QuantTables> {
    let (st, _) = run(bytes, true)?;
    tables_of(&st)
}
