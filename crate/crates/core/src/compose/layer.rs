use serde::{Deserialize, Serialize};

use super::enhance::{apply_enhance, EnhanceSettings};
use crate::error::{Error, Result};
use crate::estimate::DegradationParam;
use crate::image::{ImageBuffer, Mask};
use crate::restore::{check_strength, restore_full, Task};

/// Restoration applied to a layer; `None` leaves the pixels to enhancement only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerTask {
    Deblur,
    Denoise,
    Deblock,
    #[default]
    None,
}

impl LayerTask {
    pub fn restore_task(self) -> Option<Task> {
        match self {
            LayerTask::Deblur => Some(Task::Deblur),
            LayerTask::Denoise => Some(Task::Denoise),
            LayerTask::Deblock => Some(Task::Deblock),
            LayerTask::None => None,
        }
    }
}

impl From<Task> for LayerTask {
    fn from(t: Task) -> Self {
        match t {
            Task::Deblur => LayerTask::Deblur,
            Task::Denoise => LayerTask::Denoise,
            Task::Deblock => LayerTask::Deblock,
        }
    }
}

/// Everything the restored-and-enhanced patch of a layer depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchKey {
    pub task: LayerTask,
    pub param: Option<DegradationParam>,
    pub strength: f64,
    pub enhance: EnhanceSettings,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CachedPatch {
    pub key: PatchKey,
    pub image: ImageBuffer,
}

/// One selected object with its restoration and enhancement settings.
///
/// The mask is kept on the 1/255 grid so a saved project reproduces the
/// composite bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectLayer {
    pub id: String,
    mask: Mask,
    pub task: LayerTask,
    pub predicted: Option<DegradationParam>,
    pub override_param: Option<DegradationParam>,
    pub strength: f64,
    pub enhance: EnhanceSettings,
    pub cached_patch: Option<CachedPatch>,
}

/// Layer ids double as file names inside project files.
pub fn valid_layer_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl ObjectLayer {
    pub fn new(id: impl Into<String>, mask: Mask) -> Result<Self> {
        let id = id.into();
        if !valid_layer_id(&id) {
            return Err(Error::invalid(format!("invalid layer id {id:?}")));
        }
        Ok(ObjectLayer {
            id,
            mask: mask.quantize_u8(),
            task: LayerTask::None,
            predicted: None,
            override_param: None,
            strength: 1.0,
            enhance: EnhanceSettings::default(),
            cached_patch: None,
        })
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn set_mask(&mut self, mask: Mask) {
        self.mask = mask.quantize_u8();
    }

    /// The override when present, else the prediction.
    pub fn effective_param(&self) -> Option<&DegradationParam> {
        self.override_param.as_ref().or(self.predicted.as_ref())
    }

    pub fn validate(&self, source: &ImageBuffer) -> Result<()> {
        if !self.mask.matches(source) {
            return Err(Error::invalid(format!(
                "layer {}: mask does not match image",
                self.id
            )));
        }
        check_strength(self.strength)?;
        self.enhance.validate()?;
        if let (Some(p), Some(o)) = (&self.predicted, &self.override_param) {
            if p.kind() != o.kind() {
                return Err(Error::invalid(format!(
                    "layer {}: override kind differs from prediction",
                    self.id
                )));
            }
        }
        if let Some(task) = self.task.restore_task() {
            match self.effective_param() {
                None => {
                    return Err(Error::invalid(format!(
                        "layer {}: task {task:?} has no parameter",
                        self.id
                    )))
                }
                Some(p) if p.kind() != task.param_kind() => {
                    return Err(Error::invalid(format!(
                        "layer {}: parameter does not match task",
                        self.id
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn patch_key(&self) -> PatchKey {
        PatchKey {
            task: self.task,
            param: self
                .task
                .restore_task()
                .and(self.effective_param().cloned()),
            strength: self.strength,
            enhance: self.enhance,
        }
    }

    /// `enhance(restore(source))` over the full frame.
    pub fn render_patch(&self, source: &ImageBuffer) -> Result<ImageBuffer> {
        self.validate(source)?;
        let restored = match (self.task.restore_task(), self.effective_param()) {
            (Some(task), Some(p)) => restore_full(source, task, p, self.strength)?,
            _ => source.clone(),
        };
        if self.enhance.is_identity() {
            Ok(restored)
        } else {
            apply_enhance(&restored, &self.enhance)
        }
    }

    /// The cached patch when its key is current, otherwise a fresh render stored in the cache.
    pub fn patch(&mut self, source: &ImageBuffer) -> Result<&ImageBuffer> {
        let key = self.patch_key();
        let fresh =
            matches!(&self.cached_patch, Some(c) if c.key == key && c.image.same_shape(source));
        if !fresh {
            let image = self.render_patch(source)?;
            self.cached_patch = Some(CachedPatch { key, image });
        }
        Ok(&self.cached_patch.as_ref().expect("just filled").image)
    }
}
