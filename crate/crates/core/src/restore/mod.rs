//! Controllable classical restorers, one per degradation type.
//!
//! Every restorer takes a [`DegradationParam`] and a strength multiplier in
//! `[0, 2]`. Strength 0 returns the input unchanged, 1 applies the
//! parameter as given, and larger values restore more aggressively.

mod constants;
mod deblock;
mod tv;
mod wiener;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{DegradationParam, ParamKind};
use crate::image::{ImageBuffer, Mask};

pub use constants::{RestoreConstants, CONSTANTS_FORMAT, CONSTANTS_VERSION};
pub use deblock::{deblock_dct, deblock_dct_stats, deblock_threshold, DeblockOutput};
pub use tv::{chambolle, denoise_tv};
pub use wiener::{deblur_wiener, deconvolve};

pub const STRENGTH_RANGE: (f64, f64) = (0.0, 2.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Deblur,
    Denoise,
    Deblock,
}

impl Task {
    /// The parameter kind this task consumes.
    pub fn param_kind(self) -> ParamKind {
        match self {
            Task::Deblur => ParamKind::Blur,
            Task::Denoise => ParamKind::Noise,
            Task::Deblock => ParamKind::Jpeg,
        }
    }
}

pub fn check_strength(strength: f64) -> Result<()> {
    if (STRENGTH_RANGE.0..=STRENGTH_RANGE.1).contains(&strength) {
        Ok(())
    } else {
        Err(Error::invalid(format!("strength {strength} outside [0,2]")))
    }
}

#[derive(Clone, Debug)]
pub struct RestoreRequest<'a> {
    pub image: &'a ImageBuffer,
    pub mask: Option<&'a Mask>,
    pub task: Task,
    pub param: &'a DegradationParam,
    pub strength: f64,
}

impl RestoreRequest<'_> {
    pub fn validate(&self) -> Result<()> {
        check_strength(self.strength)?;
        if self.param.kind() != self.task.param_kind() {
            return Err(Error::invalid(format!(
                "{:?} parameter does not match task {:?}",
                self.param.kind(),
                self.task
            )));
        }
        if let Some(m) = self.mask {
            if !m.matches(self.image) {
                return Err(Error::invalid("mask dimensions do not match image"));
            }
        }
        Ok(())
    }
}

/// Runs one task operator on the whole frame.
pub fn restore_full(
    img: &ImageBuffer,
    task: Task,
    param: &DegradationParam,
    strength: f64,
) -> Result<ImageBuffer> {
    check_strength(strength)?;
    match task {
        Task::Deblur => deblur_wiener(img, param, strength),
        Task::Denoise => denoise_tv(img, param, strength),
        Task::Deblock => deblock_dct(img, param, strength),
    }
}

/// Restores the full frame, then keeps the result only under the mask.
pub fn restore(req: &RestoreRequest) -> Result<ImageBuffer> {
    req.validate()?;
    let restored = restore_full(req.image, req.task, req.param, req.strength)?;
    Ok(match req.mask {
        None => restored,
        Some(m) => blend(&restored, req.image, m),
    })
}

/// `mask * top + (1 - mask) * bottom`, per channel.
pub fn blend(top: &ImageBuffer, bottom: &ImageBuffer, mask: &Mask) -> ImageBuffer {
    let n = bottom.pixel_count();
    let alpha = mask.alpha();
    let data = bottom
        .data()
        .iter()
        .zip(top.data())
        .enumerate()
        .map(|(i, (&b, &t))| {
            let a = alpha[i % n];
            a * t + (1.0 - a) * b
        })
        .collect();
    bottom.with_data(data)
}
