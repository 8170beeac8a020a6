//! Client for an external point-prompted segmentation service.
//!
//! One stateless `multipart/form-data` POST per request: part `image`
//! (PNG) and part `prompt` (JSON `{"points":[{"x":..,"y":..,"label":..}]}`).
//! The service answers `{"mask_png": <base64>, "score": f}` or
//! `{"mask_rle": {"counts": .., "size": [h, w]}, "score": f}`.
//!
//! The client is blocking; call it from a blocking thread when inside an
//! async runtime.

use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::rle::Rle;
use super::{check_click_consistency, ClickPoint, ClickPrompt, SegmentResult, SegmentSource};
use crate::error::{Error, Result};
use crate::image::{BinaryMask, ImageBuffer};
use crate::io::{decode_mask_png, encode_png};

pub const DEFAULT_EXTERNAL_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternalSegmenter {
    pub endpoint: String,
    pub timeout: Duration,
}

impl ExternalSegmenter {
    pub fn new(endpoint: impl Into<String>) -> Self {
        ExternalSegmenter {
            endpoint: endpoint.into(),
            timeout: DEFAULT_EXTERNAL_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

#[derive(Serialize)]
struct WirePrompt<'a> {
    points: &'a [ClickPoint],
}

/// Response body of the external service.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct ExternalResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_png: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_rle: Option<Rle>,
    pub score: f64,
}

/// Decodes and validates a response body against the request geometry.
pub fn parse_external_response(
    body: &[u8],
    width: usize,
    height: usize,
) -> Result<(BinaryMask, f64)> {
    let resp: ExternalResponse = serde_json::from_slice(body)
        .map_err(|e| Error::ExternalProtocol(format!("malformed response: {e}")))?;
    if !(resp.score.is_finite() && (0.0..=1.0).contains(&resp.score)) {
        return Err(Error::ExternalProtocol(format!(
            "score {} outside [0,1]",
            resp.score
        )));
    }
    let hard = match (resp.mask_png, resp.mask_rle) {
        (Some(b64), None) => {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(b64.trim())
                .map_err(|e| Error::ExternalProtocol(format!("mask_png is not base64: {e}")))?;
            let mask = decode_mask_png(&bytes)
                .map_err(|e| Error::ExternalProtocol(format!("mask_png: {e}")))?;
            if mask.width() != width || mask.height() != height {
                return Err(Error::ExternalProtocol(format!(
                    "mask is {}x{}, image is {width}x{height}",
                    mask.width(),
                    mask.height()
                )));
            }
            BinaryMask::from_fn(width, height, |x, y| mask.get(x, y) > 0.5)
        }
        (None, Some(rle)) => {
            if rle.size != [height, width] {
                return Err(Error::ExternalProtocol(format!(
                    "RLE size {:?}, image is {height}x{width}",
                    rle.size
                )));
            }
            rle.decode()?
        }
        (Some(_), Some(_)) => {
            return Err(Error::ExternalProtocol(
                "both mask_png and mask_rle present".into(),
            ))
        }
        (None, None) => return Err(Error::ExternalProtocol("response carries no mask".into())),
    };
    Ok((hard, resp.score))
}

/// Sends the image and clicks to the external service.
pub fn segment_external(
    img: &ImageBuffer,
    prompt: &ClickPrompt,
    seg: &ExternalSegmenter,
) -> Result<SegmentResult> {
    prompt.validate(img.width(), img.height())?;
    let png = encode_png(img)?;
    let prompt_json = serde_json::to_string(&WirePrompt {
        points: &prompt.points,
    })
    .expect("prompt serialises");

    let unavailable =
        |e: reqwest::Error| Error::ExternalUnavailable(format!("{}: {e}", seg.endpoint));
    let client = reqwest::blocking::Client::builder()
        .timeout(seg.timeout)
        .build()
        .map_err(unavailable)?;
    let form = reqwest::blocking::multipart::Form::new()
        .part(
            "image",
            reqwest::blocking::multipart::Part::bytes(png)
                .file_name("image.png")
                .mime_str("image/png")
                .map_err(unavailable)?,
        )
        .part(
            "prompt",
            reqwest::blocking::multipart::Part::text(prompt_json)
                .mime_str("application/json")
                .map_err(unavailable)?,
        );
    let resp = client
        .post(&seg.endpoint)
        .multipart(form)
        .send()
        .map_err(unavailable)?;
    let status = resp.status();
    if status.is_server_error() {
        return Err(Error::ExternalUnavailable(format!(
            "{} answered {status}",
            seg.endpoint
        )));
    }
    if !status.is_success() {
        return Err(Error::ExternalProtocol(format!(
            "{} answered {status}",
            seg.endpoint
        )));
    }
    let body = resp.bytes().map_err(unavailable)?;
    let (hard, score) = parse_external_response(&body, img.width(), img.height())?;
    check_click_consistency(&hard, prompt).map_err(Error::ExternalProtocol)?;
    SegmentResult::from_hard(hard, SegmentSource::External, score, prompt.feather_radius)
}
