//! Object selection from click prompts.
//!
//! Two backends share one contract: the built-in region grower and a client
//! for an external segmentation service. Every result satisfies click
//! consistency: foreground clicks are inside the hard mask and background
//! clicks outside it.

mod builtin;
mod external;
mod feather;
pub mod morphology;
pub mod rle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Mask};

pub use builtin::segment_builtin;
pub use external::{
    parse_external_response, segment_external, ExternalResponse, ExternalSegmenter,
    DEFAULT_EXTERNAL_TIMEOUT,
};
pub use feather::{feather, DEFAULT_FEATHER_RADIUS};

pub const DEFAULT_TOLERANCE: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClickLabel {
    #[serde(alias = "fg")]
    Foreground,
    #[serde(alias = "bg")]
    Background,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickPoint {
    pub x: usize,
    pub y: usize,
    pub label: ClickLabel,
}

impl ClickPoint {
    pub fn fg(x: usize, y: usize) -> Self {
        ClickPoint {
            x,
            y,
            label: ClickLabel::Foreground,
        }
    }

    pub fn bg(x: usize, y: usize) -> Self {
        ClickPoint {
            x,
            y,
            label: ClickLabel::Background,
        }
    }
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_feather() -> f64 {
    DEFAULT_FEATHER_RADIUS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickPrompt {
    pub points: Vec<ClickPoint>,
    /// CIE76 distance within which the region grower accepts a pixel.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_feather")]
    pub feather_radius: f64,
}

impl ClickPrompt {
    pub fn new(points: Vec<ClickPoint>) -> Self {
        ClickPrompt {
            points,
            tolerance: DEFAULT_TOLERANCE,
            feather_radius: DEFAULT_FEATHER_RADIUS,
        }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if !self
            .points
            .iter()
            .any(|p| p.label == ClickLabel::Foreground)
        {
            return Err(Error::invalid("prompt needs at least one foreground click"));
        }
        if let Some(p) = self.points.iter().find(|p| p.x >= width || p.y >= height) {
            return Err(Error::invalid(format!(
                "click ({}, {}) outside {width}x{height} image",
                p.x, p.y
            )));
        }
        for (i, a) in self.points.iter().enumerate() {
            if self.points[..i]
                .iter()
                .any(|b| b.x == a.x && b.y == a.y && b.label != a.label)
            {
                return Err(Error::invalid(format!(
                    "click ({}, {}) is both foreground and background",
                    a.x, a.y
                )));
            }
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if !(self.feather_radius.is_finite() && self.feather_radius >= 0.0) {
            return Err(Error::invalid("feather radius must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentSource {
    Builtin,
    External,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentResult {
    /// Feathered alpha.
    pub mask: Mask,
    pub hard_mask: BinaryMask,
    pub source: SegmentSource,
    pub score: f64,
}

impl SegmentResult {
    pub fn from_hard(
        hard_mask: BinaryMask,
        source: SegmentSource,
        score: f64,
        radius: f64,
    ) -> Result<Self> {
        Ok(SegmentResult {
            mask: feather(&hard_mask, radius)?,
            hard_mask,
            source,
            score,
        })
    }
}

/// Describes the first click that disagrees with `hard`, if any.
pub fn check_click_consistency(
    hard: &BinaryMask,
    prompt: &ClickPrompt,
) -> std::result::Result<(), String> {
    for p in &prompt.points {
        let inside = hard.get(p.x, p.y);
        match p.label {
            ClickLabel::Foreground if !inside => {
                return Err(format!(
                    "foreground click ({}, {}) is outside the mask",
                    p.x, p.y
                ))
            }
            ClickLabel::Background if inside => {
                return Err(format!(
                    "background click ({}, {}) is inside the mask",
                    p.x, p.y
                ))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Builtin segmentation, or the external service when one is configured.
pub fn segment(
    img: &crate::ImageBuffer,
    prompt: &ClickPrompt,
    external: Option<&ExternalSegmenter>,
) -> Result<SegmentResult> {
    match external {
        Some(seg) => segment_external(img, prompt, seg),
        None => segment_builtin(img, prompt),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_validation() {
        assert!(ClickPrompt::new(vec![ClickPoint::bg(1, 1)])
            .validate(4, 4)
            .is_err());
        assert!(matches!(
            ClickPrompt::new(vec![ClickPoint::fg(4, 1)]).validate(4, 4),
            Err(Error::InvalidArgument(_))
        ));
        assert!(
            ClickPrompt::new(vec![ClickPoint::fg(1, 1), ClickPoint::bg(1, 1)])
                .validate(4, 4)
                .is_err()
        );
        assert!(ClickPrompt::new(vec![ClickPoint::fg(3, 3)])
            .validate(4, 4)
            .is_ok());
    }

    #[test]
    fn prompt_json_defaults() {
        let p: ClickPrompt =
            serde_json::from_str(r#"{"points":[{"x":1,"y":2,"label":"fg"}]}"#).unwrap();
        assert_eq!(p.tolerance, 12.0);
        assert_eq!(p.points[0], ClickPoint::fg(1, 2));
        assert_eq!(
            serde_json::to_value(ClickPoint::bg(0, 3)).unwrap(),
            serde_json::json!({"x":0,"y":3,"label":"background"})
        );
    }
}
