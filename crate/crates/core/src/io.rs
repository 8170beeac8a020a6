//! 8-bit PNG and JPEG I/O at the service boundary.

use std::io::Cursor;

use image::{DynamicImage, ImageFormat};

use crate::color::convert_colorspace;
use crate::error::{Error, Result};
use crate::image::{ColorSpace, ImageBuffer, Mask};
use crate::jpeg::{self, QuantTables};

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Caps decoded allocations for untrusted input.
pub const MAX_PIXELS: usize = 1 << 26;

/// Decodes an 8- or 16-bit PNG. Alpha is discarded; gray stays single-channel sRGB.
pub fn decode_png(bytes: &[u8]) -> Result<ImageBuffer> {
    if !bytes.starts_with(PNG_SIGNATURE) {
        return Err(Error::parse(0, "missing PNG signature"));
    }
    let mut reader = image::ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png);
    let mut limits = image::Limits::default();
    limits.max_alloc = Some((MAX_PIXELS * 8) as u64);
    reader.limits(limits);
    let dynamic = reader
        .decode()
        .map_err(|e| Error::parse(0, format!("PNG: {e}")))?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    if w * h > MAX_PIXELS {
        return Err(Error::invalid("image too large"));
    }
    let color = dynamic.color();
    let gray = !color.has_color();
    if color.bytes_per_pixel() / color.channel_count() > 1 {
        let samples: Vec<u16> = if gray {
            dynamic.into_luma16().into_raw()
        } else {
            dynamic.into_rgb16().into_raw()
        };
        let ch = if gray { 1 } else { 3 };
        let n = w * h;
        let mut data = vec![0.0; n * ch];
        for i in 0..n {
            for c in 0..ch {
                data[c * n + i] = samples[i * ch + c] as f64 / 65535.0;
            }
        }
        return ImageBuffer::new(w, h, ch, ColorSpace::Srgb, data);
    }
    if gray {
        ImageBuffer::from_interleaved_u8(w, h, 1, &dynamic.into_luma8().into_raw())
    } else {
        ImageBuffer::from_interleaved_u8(w, h, 3, &dynamic.into_rgb8().into_raw())
    }
}

/// Encodes as 8-bit PNG. Lab input is converted to sRGB first.
pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    let img = if img.colorspace() == ColorSpace::Lab {
        convert_colorspace(img, ColorSpace::Srgb)?
    } else {
        img.clone()
    };
    let (w, h) = (img.width() as u32, img.height() as u32);
    let bytes = img.to_interleaved_u8();
    let dynamic = if img.channels() == 1 {
        DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, bytes).expect("length checked"))
    } else {
        DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, bytes).expect("length checked"))
    };
    let mut out = Vec::new();
    dynamic
        .write_to(&mut Cursor::new(&mut out), ImageFormat::Png)
        .map_err(|e| Error::invalid(format!("PNG encode failed: {e}")))?;
    Ok(out)
}

/// Mask as 8-bit grayscale PNG.
pub fn encode_mask_png(mask: &Mask) -> Result<Vec<u8>> {
    let img = ImageBuffer::new(
        mask.width(),
        mask.height(),
        1,
        ColorSpace::Srgb,
        mask.alpha().to_vec(),
    )?;
    encode_png(&img)
}

/// Reads a grayscale (or colour, via luma) PNG as a soft mask.
pub fn decode_mask_png(bytes: &[u8]) -> Result<Mask> {
    let img = decode_png(bytes)?;
    let alpha = if img.channels() == 1 {
        img.plane(0).to_vec()
    } else {
        crate::color::luma_plane(&img)
            .into_iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect()
    };
    Mask::new(img.width(), img.height(), alpha)
}

/// Source image container detected from the leading bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceFormat {
    Png,
    Jpeg,
}

pub fn sniff(bytes: &[u8]) -> Option<SourceFormat> {
    if bytes.starts_with(PNG_SIGNATURE) {
        Some(SourceFormat::Png)
    } else if bytes.starts_with(&[0xFF, 0xD8]) {
        Some(SourceFormat::Jpeg)
    } else {
        None
    }
}

/// A decoded upload, keeping the JPEG quantisation tables when present.
#[derive(Clone, Debug)]
pub struct DecodedSource {
    pub image: ImageBuffer,
    pub format: SourceFormat,
    pub quant_tables: Option<QuantTables>,
}

/// Decodes a PNG or baseline JPEG upload.
pub fn decode_image(bytes: &[u8]) -> Result<DecodedSource> {
    match sniff(bytes) {
        Some(SourceFormat::Png) => Ok(DecodedSource {
            image: decode_png(bytes)?,
            format: SourceFormat::Png,
            quant_tables: None,
        }),
        Some(SourceFormat::Jpeg) => {
            let decoded = jpeg::decode(bytes)?;
            Ok(DecodedSource {
                image: decoded.image,
                format: SourceFormat::Jpeg,
                quant_tables: Some(decoded.tables),
            })
        }
        None => Err(Error::parse(
            0,
            "unrecognised image signature (expected PNG or JPEG)",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_lossless_for_quantised() {
        let img = ImageBuffer::from_fn(9, 7, 3, ColorSpace::Srgb, |c, x, y| {
            ((x * 31 + y * 17 + c * 80) % 256) as f64 / 255.0
        })
        .unwrap();
        let back = decode_png(&encode_png(&img).unwrap()).unwrap();
        assert_eq!(back, img);
        let gray = ImageBuffer::from_fn(5, 5, 1, ColorSpace::Srgb, |_, x, y| {
            ((x + y * 5) * 10) as f64 / 255.0
        })
        .unwrap();
        assert_eq!(decode_png(&encode_png(&gray).unwrap()).unwrap(), gray);
    }

    #[test]
    fn mask_round_trip() {
        let m = Mask::from_fn(6, 4, |x, y| ((x * 40 + y * 3) % 256) as f64 / 255.0).unwrap();
        assert_eq!(decode_mask_png(&encode_mask_png(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn garbage_is_a_parse_error() {
        assert!(matches!(decode_image(b"hello"), Err(Error::Parse { .. })));
        assert!(matches!(
            decode_png(b"\x89PNG\r\n\x1a\nxx"),
            Err(Error::Parse { .. })
        ));
    }
}
