use serde::{Deserialize, Serialize};

use crate::conv::gaussian_blur;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// Per-object tone and sharpness adjustments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnhanceSettings {
    /// Additive offset in `[-0.5, 0.5]`.
    pub brightness: f64,
    /// Multiplier about mid-gray in `[0.25, 4]`.
    pub contrast: f64,
    /// Gaussian sigma in `[0, 5]` pixels.
    pub smoothness: f64,
    /// Gaussian sigma in `[0, 8]` pixels, for deliberate defocus.
    pub bokeh_sigma: f64,
}

impl Default for EnhanceSettings {
    fn default() -> Self {
        EnhanceSettings {
            brightness: 0.0,
            contrast: 1.0,
            smoothness: 0.0,
            bokeh_sigma: 0.0,
        }
    }
}

impl EnhanceSettings {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64, lo: f64, hi: f64| {
            if (lo..=hi).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} {v} outside [{lo},{hi}]")))
            }
        };
        check("brightness", self.brightness, -0.5, 0.5)?;
        check("contrast", self.contrast, 0.25, 4.0)?;
        check("smoothness", self.smoothness, 0.0, 5.0)?;
        check("bokeh_sigma", self.bokeh_sigma, 0.0, 8.0)
    }

    pub fn is_identity(&self) -> bool {
        *self == EnhanceSettings::default()
    }
}

/// Contrast, then brightness, then clamp, then smoothness blur, then bokeh blur.
pub fn apply_enhance(img: &ImageBuffer, s: &EnhanceSettings) -> Result<ImageBuffer> {
    s.validate()?;
    let mut out = if s.contrast == 1.0 && s.brightness == 0.0 {
        img.clone()
    } else {
        img.map(|v| ((v - 0.5) * s.contrast + 0.5) + s.brightness)
    };
    if s.smoothness > 0.0 {
        out = gaussian_blur(&out, s.smoothness)?;
    }
    if s.bokeh_sigma > 0.0 {
        out = gaussian_blur(&out, s.bokeh_sigma)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::image::ColorSpace;

    #[test]
    fn defaults_are_exact_no_op() {
        let img = fixtures::natural(2, 24, 24);
        assert_eq!(
            apply_enhance(&img, &EnhanceSettings::default()).unwrap(),
            img
        );
    }

    #[test]
    fn analytic_values() {
        let gray = ImageBuffer::filled(4, 4, 3, ColorSpace::Srgb, 0.5).unwrap();
        let s = EnhanceSettings {
            brightness: 0.2,
            ..Default::default()
        };
        assert!(apply_enhance(&gray, &s)
            .unwrap()
            .data()
            .iter()
            .all(|v| (v - 0.7).abs() < 1e-6));
        let px = ImageBuffer::filled(2, 2, 1, ColorSpace::Srgb, 0.75).unwrap();
        let s = EnhanceSettings {
            contrast: 2.0,
            ..Default::default()
        };
        assert!(apply_enhance(&px, &s)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 1.0));
    }

    #[test]
    fn out_of_range_rejected() {
        let img = fixtures::natural(2, 8, 8);
        for s in [
            EnhanceSettings {
                brightness: 0.6,
                ..Default::default()
            },
            EnhanceSettings {
                contrast: 0.2,
                ..Default::default()
            },
            EnhanceSettings {
                smoothness: 5.5,
                ..Default::default()
            },
            EnhanceSettings {
                bokeh_sigma: -1.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                apply_enhance(&img, &s),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn partial_json_uses_defaults() {
        let s: EnhanceSettings = serde_json::from_str(r#"{"contrast": 1.5}"#).unwrap();
        assert_eq!(
            s,
            EnhanceSettings {
                contrast: 1.5,
                ..Default::default()
            }
        );
    }
}
