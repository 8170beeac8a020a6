//! Command-line front end. Each subcommand loads a project file, runs the
//! same operation as the matching HTTP endpoint and saves the project back.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use objrestore::compose::{EnhanceSettings, ExportFormat, Project};
use objrestore::estimate::DegradationParam;
use objrestore::restore::Task;
use objrestore::segment::{ClickLabel, ClickPoint, ExternalSegmenter};
use objrestore::Error;

use crate::bench;
use crate::config::Config;
use crate::error::{ServiceError, ServiceResult};
use crate::ops::{self, Backend, RestoreRequestBody, SegmentRequest};

#[derive(Parser, Debug)]
#[command(
    name = "objrestore",
    version,
    about = "Per-object interactive image restoration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Create a project from a PNG or JPEG image.
    New {
        image: PathBuf,
        #[arg(short, long)]
        project: PathBuf,
        /// Replace an existing project.
        #[arg(long)]
        overwrite: bool,
    },
    /// Select an object from clicks and add it as a new layer.
    Segment(SegmentArgs),
    /// Predict the degradation parameter of a layer.
    Estimate {
        #[arg(short, long)]
        project: PathBuf,
        #[arg(short, long)]
        layer: String,
        #[arg(short, long, value_enum)]
        task: TaskArg,
    },
    /// Preview or commit a restoration of a layer.
    Restore(RestoreArgs),
    /// Set the enhancement of a layer.
    Enhance(EnhanceArgs),
    /// Write the composite as PNG.
    Composite {
        #[arg(short, long)]
        project: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Export the composite as PNG or JPEG.
    Export {
        #[arg(short, long)]
        project: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Png)]
        format: FormatArg,
        #[arg(long, default_value_t = 95)]
        quality: u8,
        /// Allow JPEG quality below 50.
        #[arg(long)]
        force: bool,
    },
    /// Run the acceptance harness and write a CSV of results.
    Bench {
        /// CSV destination; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Run only criteria whose id contains this text.
        #[arg(long)]
        only: Option<String>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    #[arg(short, long)]
    pub project: PathBuf,
    /// Click as `x,y` (foreground) or `x,y,bg`; repeatable.
    #[arg(long = "point", required = true, value_parser = parse_point)]
    pub points: Vec<ClickPoint>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub feather_radius: Option<f64>,
    #[arg(long, value_enum, default_value_t = BackendArg::Builtin)]
    pub backend: BackendArg,
    /// Endpoint of the external segmenter.
    #[arg(long)]
    pub external_url: Option<String>,
    /// Write the feathered mask PNG here.
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RestoreArgs {
    #[arg(short, long)]
    pub project: PathBuf,
    #[arg(short, long)]
    pub layer: String,
    #[arg(short, long, value_enum)]
    pub task: Option<TaskArg>,
    /// Parameter override as JSON, e.g. `{"kind":"noise","sigma_noise":20}`.
    #[arg(long = "override")]
    pub override_json: Option<String>,
    #[arg(short, long, default_value_t = 1.0)]
    pub strength: f64,
    /// Render downscaled variants instead of committing.
    #[arg(long)]
    pub preview: bool,
    /// Commit: patch PNG path. Preview: directory for variant PNGs.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EnhanceArgs {
    #[arg(short, long)]
    pub project: PathBuf,
    #[arg(short, long)]
    pub layer: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub brightness: f64,
    #[arg(long, default_value_t = 1.0)]
    pub contrast: f64,
    #[arg(long, default_value_t = 0.0)]
    pub smoothness: f64,
    #[arg(long, default_value_t = 0.0)]
    pub bokeh_sigma: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TaskArg {
    Deblur,
    Denoise,
    Deblock,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Deblur => Task::Deblur,
            TaskArg::Denoise => Task::Denoise,
            TaskArg::Deblock => Task::Deblock,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Builtin,
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Png,
    Jpeg,
}

fn parse_point(s: &str) -> Result<ClickPoint, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let coord = |p: &str| {
        p.parse::<usize>()
            .map_err(|_| format!("bad coordinate {p:?}"))
    };
    let label = match parts.get(2).copied() {
        None | Some("fg") | Some("foreground") => ClickLabel::Foreground,
        Some("bg") | Some("background") => ClickLabel::Background,
        Some(other) => return Err(format!("unknown label {other:?}")),
    };
    if !(2..=3).contains(&parts.len()) {
        return Err("expected x,y or x,y,label".into());
    }
    Ok(ClickPoint {
        x: coord(parts[0])?,
        y: coord(parts[1])?,
        label,
    })
}

/// Output of one subcommand: a JSON document for stdout.
pub type Outcome = serde_json::Value;

fn json(v: impl Serialize) -> Outcome {
    serde_json::to_value(v).expect("response serialises")
}

fn write_file(path: &Path, bytes: &[u8]) -> ServiceResult<()> {
    Ok(std::fs::write(path, bytes).map_err(Error::from)?)
}

fn edit<T>(
    project_path: &Path,
    f: impl FnOnce(&mut Project) -> ServiceResult<T>,
) -> ServiceResult<T> {
    let mut project = Project::load(project_path)?;
    let out = f(&mut project)?;
    project.save(project_path)?;
    Ok(out)
}

/// Runs every subcommand except `serve`.
pub fn run(command: Command) -> ServiceResult<Outcome> {
    match command {
        Command::New {
            image,
            project,
            overwrite,
        } => {
            if project.exists() && !overwrite {
                return Err(ServiceError::Conflict(
                    "project already exists; pass --overwrite".into(),
                ));
            }
            let bytes = std::fs::read(&image).map_err(Error::from)?;
            let p = ops::create_project(&bytes, usize::MAX)?;
            p.save(&project)?;
            let s = p.source();
            Ok(serde_json::json!({
                "width": s.width(),
                "height": s.height(),
                "channels": s.channels(),
                "jpeg_tables": p.quant_tables.is_some(),
            }))
        }
        Command::Segment(a) => {
            let external = a.external_url.clone().map(ExternalSegmenter::new);
            let req = SegmentRequest {
                points: a.points,
                tolerance: a.tolerance,
                feather_radius: a.feather_radius,
                backend: match a.backend {
                    BackendArg::Builtin => Backend::Builtin,
                    BackendArg::External => Backend::External,
                },
            };
            let mut out = edit(&a.project, |p| {
                ops::segment_layer(p, &req, external.as_ref())
            })?;
            if let Some(path) = &a.mask_out {
                use base64::Engine;
                let png = base64::engine::general_purpose::STANDARD
                    .decode(&out.mask_png)
                    .map_err(|e| ServiceError::Internal(e.to_string()))?;
                write_file(path, &png)?;
                out.mask_png.clear();
            }
            Ok(json(out))
        }
        Command::Estimate {
            project,
            layer,
            task,
        } => Ok(json(edit(&project, |p| {
            ops::estimate_layer(p, &layer, task.into())
        })?)),
        Command::Restore(a) => restore(a),
        Command::Enhance(a) => {
            let settings = EnhanceSettings {
                brightness: a.brightness,
                contrast: a.contrast,
                smoothness: a.smoothness,
                bokeh_sigma: a.bokeh_sigma,
            };
            Ok(json(edit(&a.project, |p| {
                ops::enhance_layer(p, &a.layer, settings)
            })?))
        }
        Command::Composite { project, out } => {
            let mut p = Project::load(&project)?;
            let png = ops::composite_png(&mut p)?;
            write_file(&out, &png)?;
            Ok(serde_json::json!({ "bytes": png.len() }))
        }
        Command::Export {
            project,
            out,
            format,
            quality,
            force,
        } => {
            let mut p = Project::load(&project)?;
            let format = match format {
                FormatArg::Png => ExportFormat::Png,
                FormatArg::Jpeg => ExportFormat::Jpeg { quality, force },
            };
            let bytes = ops::export(&mut p, format)?;
            write_file(&out, &bytes)?;
            Ok(serde_json::json!({ "media_type": format.media_type(), "bytes": bytes.len() }))
        }
        Command::Bench { out, only } => {
            let reports = bench::run_selected(only.as_deref(), &bench::LibraryOracle);
            let csv = bench::to_csv(&reports);
            match &out {
                Some(path) => write_file(path, csv.as_bytes())?,
                None => print!("{csv}"),
            }
            let failed: Vec<&str> = reports
                .iter()
                .filter(|r| !r.passed())
                .map(|r| r.id)
                .collect();
            if !failed.is_empty() {
                return Err(ServiceError::Conflict(format!(
                    "criteria failed: {}",
                    failed.join(", ")
                )));
            }
            Ok(serde_json::json!({ "criteria": reports.len(), "failed": 0 }))
        }
        Command::Serve { .. } => {
            Err(Error::InvalidArgument("serve is handled by the binary".into()).into())
        }
    }
}

fn restore(a: RestoreArgs) -> ServiceResult<Outcome> {
    let override_param = a
        .override_json
        .as_deref()
        .map(serde_json::from_str::<DegradationParam>)
        .transpose()
        .map_err(|e| Error::InvalidArgument(format!("invalid override: {e}")))?;
    let req = RestoreRequestBody {
        task: a.task.map(Task::from),
        override_param,
        strength_scale: a.strength,
        preview: a.preview,
    };
    if a.preview {
        let config = Config::default();
        let p = Project::load(&a.project)?;
        let layer = p
            .layer(&a.layer)
            .ok_or_else(|| ServiceError::NotFound(format!("layer {}", a.layer)))?;
        let resolved = ops::resolve_restore(layer, &req)?;
        let variants = ops::render_previews(
            p.source(),
            layer,
            &resolved,
            &config.preview_factors,
            config.preview_max_dim,
            &|| true,
        )?;
        let mut summary = Vec::new();
        for (i, v) in variants.iter().enumerate() {
            if let Some(dir) = &a.out {
                use base64::Engine;
                std::fs::create_dir_all(dir).map_err(Error::from)?;
                let png = base64::engine::general_purpose::STANDARD
                    .decode(&v.image_png)
                    .map_err(|e| ServiceError::Internal(e.to_string()))?;
                write_file(&dir.join(format!("variant-{i}.png")), &png)?;
            }
            summary.push(serde_json::json!({
                "strength_scale": v.strength_scale,
                "width": v.width,
                "height": v.height,
                "total_variation": v.total_variation,
            }));
        }
        return Ok(serde_json::json!({
            "layer_id": a.layer,
            "task": resolved.task,
            "param": resolved.param,
            "variants": summary,
        }));
    }
    let mut out = edit(&a.project, |p| {
        let layer = p
            .layer(&a.layer)
            .ok_or_else(|| ServiceError::NotFound(format!("layer {}", a.layer)))?;
        let resolved = ops::resolve_restore(layer, &req)?;
        ops::commit_restore(p, &a.layer, resolved)
    })?;
    if let Some(path) = &a.out {
        use base64::Engine;
        let png = base64::engine::general_purpose::STANDARD
            .decode(&out.patch_png)
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        write_file(path, &png)?;
    }
    out.patch_png.clear();
    Ok(json(out))
}

/// Process exit code for a failed command.
pub fn exit_code(e: &ServiceError) -> i32 {
    match e.status() {
        400 | 413 => 2,
        404 => 3,
        409 => 4,
        422 => 5,
        502 => 6,
        _ => 1,
    }
}

/// Prints an outcome or error document and returns the exit code.
pub fn report(result: ServiceResult<Outcome>) -> i32 {
    match result {
        Ok(v) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(
                stdout,
                "{}",
                serde_json::to_string_pretty(&v).expect("json")
            );
            0
        }
        Err(e) => {
            let body = crate::http::ErrorBody {
                error: e.code().into(),
                message: e.to_string(),
                hint: e.hint().map(str::to_string),
            };
            eprintln!("{}", serde_json::to_string(&body).expect("json"));
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_syntax() {
        assert_eq!(parse_point("3,4").unwrap(), ClickPoint::fg(3, 4));
        assert_eq!(parse_point("3, 4, bg").unwrap(), ClickPoint::bg(3, 4));
        assert!(parse_point("3").is_err());
        assert!(parse_point("3,4,maybe").is_err());
        assert!(parse_point("-1,4").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
