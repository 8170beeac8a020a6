use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::io::encode_png;
use crate::jpeg;

/// Below this JPEG quality an export must be forced explicitly.
pub const MIN_UNFORCED_JPEG_QUALITY: u8 = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase")]
pub enum ExportFormat {
    Png,
    Jpeg {
        quality: u8,
        #[serde(default)]
        force: bool,
    },
}

impl ExportFormat {
    pub fn media_type(&self) -> &'static str {
        match self {
            ExportFormat::Png => "image/png",
            ExportFormat::Jpeg { .. } => "image/jpeg",
        }
    }
}

/// Encodes a composite. Low-quality JPEG is refused unless forced, since it
/// would re-introduce the artifacts the session removed.
pub fn export_image(img: &ImageBuffer, format: ExportFormat) -> Result<Vec<u8>> {
    match format {
        ExportFormat::Png => encode_png(img),
        ExportFormat::Jpeg { quality, force } => {
            if !(1..=100).contains(&quality) {
                return Err(Error::invalid(format!(
                    "JPEG quality {quality} outside [1,100]"
                )));
            }
            if quality < MIN_UNFORCED_JPEG_QUALITY && !force {
                return Err(Error::ExportPolicy(format!(
                    "JPEG quality {quality} is below {MIN_UNFORCED_JPEG_QUALITY}; set force to export anyway"
                )));
            }
            jpeg::encode(img, quality)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::io::decode_png;
    use crate::metrics::psnr;

    #[test]
    fn png_is_lossless_at_8_bits() {
        let img = crate::restore::blend(
            &fixtures::natural(1, 40, 30).map(|v| v * 0.9 + 0.013),
            &fixtures::natural(2, 40, 30),
            &crate::Mask::filled(40, 30, 0.37).unwrap(),
        );
        let back = decode_png(&export_image(&img, ExportFormat::Png).unwrap()).unwrap();
        assert_eq!(back, img.quantize_u8());
    }

    #[test]
    fn jpeg_95_round_trip() {
        let img = fixtures::natural(3, 96, 96);
        let bytes = export_image(
            &img,
            ExportFormat::Jpeg {
                quality: 95,
                force: false,
            },
        )
        .unwrap();
        let back = jpeg::decode(&bytes).unwrap().image;
        assert!(psnr(&back, &img).unwrap() >= 40.0);
    }

    #[test]
    fn low_quality_needs_force() {
        let img = fixtures::natural(3, 16, 16);
        assert!(matches!(
            export_image(
                &img,
                ExportFormat::Jpeg {
                    quality: 30,
                    force: false
                }
            ),
            Err(Error::ExportPolicy(_))
        ));
        assert!(export_image(
            &img,
            ExportFormat::Jpeg {
                quality: 30,
                force: true
            }
        )
        .is_ok());
    }

    #[test]
    fn format_json() {
        let f: ExportFormat = serde_json::from_str(r#"{"format":"jpeg","quality":80}"#).unwrap();
        assert_eq!(
            f,
            ExportFormat::Jpeg {
                quality: 80,
                force: false
            }
        );
        let f: ExportFormat = serde_json::from_str(r#"{"format":"png"}"#).unwrap();
        assert_eq!(f, ExportFormat::Png);
        assert!(serde_json::from_str::<ExportFormat>(r#"{"format":"gif"}"#).is_err());
    }
}
