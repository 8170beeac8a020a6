//! Session operations shared by the HTTP handlers and the CLI.
//!
//! Both front ends call these functions on a [`Project`], which is what
//! keeps their artifacts byte-identical.

use base64::Engine;
use serde::{Deserialize, Serialize};

use objrestore::compose::{
    export_image, EnhanceSettings, ExportFormat, LayerTask, ObjectLayer, Project,
};
use objrestore::estimate::{self, Calibration, DegradationParam};
use objrestore::io::{decode_image, encode_mask_png, encode_png};
use objrestore::metrics::total_variation;
use objrestore::restore::{blend, check_strength, Task};
use objrestore::segment::{
    segment_builtin, segment_external, ClickPoint, ClickPrompt, ExternalSegmenter, SegmentSource,
};
use objrestore::{Error, ImageBuffer};

use crate::error::{ServiceError, ServiceResult};

pub fn b64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

/// Decodes an upload into a fresh project, keeping JPEG tables.
pub fn create_project(bytes: &[u8], limit: usize) -> ServiceResult<Project> {
    if bytes.len() > limit {
        return Err(ServiceError::TooLarge { limit });
    }
    let decoded = decode_image(bytes)?;
    Ok(Project::new(decoded.image, decoded.quant_tables)?)
}

/// `layer-N` with N one past the largest existing number.
pub fn next_layer_id(project: &Project) -> String {
    let max = project
        .layers
        .iter()
        .filter_map(|l| {
            l.id.strip_prefix("layer-")
                .and_then(|n| n.parse::<u64>().ok())
        })
        .max()
        .unwrap_or(0);
    format!("layer-{}", max + 1)
}

fn layer_mut<'a>(project: &'a mut Project, id: &str) -> ServiceResult<&'a mut ObjectLayer> {
    project
        .layer_mut(id)
        .ok_or_else(|| ServiceError::NotFound(format!("layer {id}")))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Builtin,
    External,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SegmentRequest {
    pub points: Vec<ClickPoint>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub feather_radius: Option<f64>,
    #[serde(default)]
    pub backend: Backend,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SegmentResponse {
    pub layer_id: String,
    /// Feathered mask, 8-bit grayscale PNG, base64.
    pub mask_png: String,
    pub score: f64,
    pub source: SegmentSource,
    pub selected_pixels: usize,
}

pub fn segment_layer(
    project: &mut Project,
    req: &SegmentRequest,
    external: Option<&ExternalSegmenter>,
) -> ServiceResult<SegmentResponse> {
    let mut prompt = ClickPrompt::new(req.points.clone());
    if let Some(t) = req.tolerance {
        prompt.tolerance = t;
    }
    if let Some(r) = req.feather_radius {
        prompt.feather_radius = r;
    }
    let result = match req.backend {
        Backend::Builtin => segment_builtin(project.source(), &prompt)?,
        Backend::External => {
            let seg = external.ok_or_else(|| {
                Error::ExternalUnavailable("no external segmenter is configured".into())
            })?;
            segment_external(project.source(), &prompt, seg)?
        }
    };
    let id = next_layer_id(project);
    let layer = ObjectLayer::new(id.clone(), result.mask)?;
    let mask_png = b64(&encode_mask_png(layer.mask())?);
    project.add_layer(layer)?;
    Ok(SegmentResponse {
        layer_id: id,
        mask_png,
        score: result.score,
        source: result.source,
        selected_pixels: result.hard_mask.count(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EstimateResponse {
    pub layer_id: String,
    pub task: Task,
    pub param: DegradationParam,
}

/// Runs the task's estimator on the layer region and stores the prediction.
pub fn estimate_layer(
    project: &mut Project,
    layer_id: &str,
    task: Task,
) -> ServiceResult<EstimateResponse> {
    let tables = project.quant_tables;
    let source = project.source().clone();
    let layer = layer_mut(project, layer_id)?;
    let mask = layer.mask().clone();
    let cal = Calibration::builtin();
    let param = match task {
        Task::Deblock => {
            estimate::estimate_jpeg_quality(&source, Some(&mask), tables.as_ref(), cal)?
        }
        other => estimate::estimate(other.param_kind(), &source, Some(&mask), cal)?,
    };
    if layer
        .override_param
        .as_ref()
        .is_some_and(|o| o.kind() != param.kind())
    {
        layer.override_param = None;
    }
    layer.predicted = Some(param.clone());
    layer.task = task.into();
    Ok(EstimateResponse {
        layer_id: layer_id.to_string(),
        task,
        param,
    })
}

fn default_strength() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestoreRequestBody {
    /// Defaults to the task of the last estimate.
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default, rename = "override")]
    pub override_param: Option<DegradationParam>,
    #[serde(default = "default_strength")]
    pub strength_scale: f64,
    #[serde(default)]
    pub preview: bool,
}

/// Task, parameter and strength a restore request resolves to.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedRestore {
    pub task: Task,
    pub param: DegradationParam,
    pub override_param: Option<DegradationParam>,
    pub strength: f64,
}

pub fn resolve_restore(
    layer: &ObjectLayer,
    req: &RestoreRequestBody,
) -> ServiceResult<ResolvedRestore> {
    check_strength(req.strength_scale)?;
    let task = match (req.task, layer.task.restore_task()) {
        (Some(t), _) | (None, Some(t)) => t,
        (None, None) => {
            return Err(Error::InvalidArgument(
                "layer has no task: pass one or run estimate first".into(),
            )
            .into())
        }
    };
    let override_param = req
        .override_param
        .clone()
        .map(DegradationParam::validated)
        .transpose()?;
    if let Some(o) = &override_param {
        if o.kind() != task.param_kind() {
            return Err(Error::InvalidArgument(format!(
                "override of kind {:?} does not match task {task:?}",
                o.kind()
            ))
            .into());
        }
    }
    let param = override_param
        .clone()
        .or_else(|| {
            layer
                .override_param
                .clone()
                .filter(|p| p.kind() == task.param_kind())
        })
        .or_else(|| {
            layer
                .predicted
                .clone()
                .filter(|p| p.kind() == task.param_kind())
        })
        .ok_or_else(|| {
            ServiceError::Conflict(format!(
                "layer {} has no {task:?} parameter; estimate or override first",
                layer.id
            ))
        })?;
    Ok(ResolvedRestore {
        task,
        param,
        override_param,
        strength: req.strength_scale,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PreviewVariant {
    pub strength_scale: f64,
    /// Layer blended over the source, downscaled, PNG base64.
    pub image_png: String,
    pub width: usize,
    pub height: usize,
    /// Total variation of the full-resolution blended variant.
    pub total_variation: f64,
}

/// Renders preview variants at `factor * strength` for each factor.
///
/// `is_current` is polled between variants; once it returns false the
/// render stops with [`ServiceError::Superseded`].
pub fn render_previews(
    source: &ImageBuffer,
    layer: &ObjectLayer,
    resolved: &ResolvedRestore,
    factors: &[f64],
    max_dim: usize,
    is_current: &dyn Fn() -> bool,
) -> ServiceResult<Vec<PreviewVariant>> {
    let mut out = Vec::with_capacity(factors.len());
    for &f in factors {
        if !is_current() {
            return Err(ServiceError::Superseded);
        }
        let strength = (f * resolved.strength).clamp(0.0, 2.0);
        let mut variant = layer.clone();
        variant.task = resolved.task.into();
        variant.override_param = Some(resolved.param.clone());
        variant.strength = strength;
        variant.cached_patch = None;
        let patch = variant.render_patch(source)?;
        let full = blend(&patch, source, layer.mask());
        let small = full.downscale_to_fit(max_dim);
        out.push(PreviewVariant {
            strength_scale: strength,
            image_png: b64(&encode_png(&small)?),
            width: small.width(),
            height: small.height(),
            total_variation: total_variation(&full),
        });
    }
    if !is_current() {
        return Err(ServiceError::Superseded);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PreviewResponse {
    pub layer_id: String,
    pub task: Task,
    pub param: DegradationParam,
    pub variants: Vec<PreviewVariant>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CommitResponse {
    pub layer_id: String,
    pub task: Task,
    pub param: DegradationParam,
    pub strength_scale: f64,
    /// Full-resolution restored and enhanced frame, PNG base64.
    pub patch_png: String,
}

/// Stores the chosen parameters and caches the full-resolution patch.
pub fn commit_restore(
    project: &mut Project,
    layer_id: &str,
    resolved: ResolvedRestore,
) -> ServiceResult<CommitResponse> {
    let source = project.source().clone();
    let layer = layer_mut(project, layer_id)?;
    let previous = layer.clone();
    layer.task = resolved.task.into();
    if resolved.override_param.is_some() {
        layer.override_param = resolved.override_param.clone();
    }
    layer.strength = resolved.strength;
    let patch = match layer.patch(&source) {
        Ok(p) => p.clone(),
        Err(e) => {
            *layer = previous;
            return Err(e.into());
        }
    };
    Ok(CommitResponse {
        layer_id: layer_id.to_string(),
        task: resolved.task,
        param: resolved.param,
        strength_scale: resolved.strength,
        patch_png: b64(&encode_png(&patch)?),
    })
}

pub fn enhance_layer(
    project: &mut Project,
    layer_id: &str,
    settings: EnhanceSettings,
) -> ServiceResult<LayerInfo> {
    settings.validate()?;
    let layer = layer_mut(project, layer_id)?;
    layer.enhance = settings;
    Ok(LayerInfo::from(&*layer))
}

pub fn composite_png(project: &mut Project) -> ServiceResult<Vec<u8>> {
    Ok(encode_png(&project.composite()?)?)
}

pub fn export(project: &mut Project, format: ExportFormat) -> ServiceResult<Vec<u8>> {
    let img = project.composite()?;
    Ok(export_image(&img, format)?)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LayerInfo {
    pub id: String,
    pub task: LayerTask,
    pub predicted: Option<DegradationParam>,
    #[serde(rename = "override")]
    pub override_param: Option<DegradationParam>,
    pub strength_scale: f64,
    pub enhance: EnhanceSettings,
    pub cached: bool,
}

impl From<&ObjectLayer> for LayerInfo {
    fn from(l: &ObjectLayer) -> Self {
        LayerInfo {
            id: l.id.clone(),
            task: l.task,
            predicted: l.predicted.clone(),
            override_param: l.override_param.clone(),
            strength_scale: l.strength,
            enhance: l.enhance,
            cached: l.cached_patch.is_some(),
        }
    }
}
