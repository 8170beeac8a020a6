//! Project files: a directory or zip archive holding `manifest.json`,
//! `source.png` and one `masks/<id>.png` per layer.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::composite::composite;
use super::enhance::EnhanceSettings;
use super::layer::{valid_layer_id, LayerTask, ObjectLayer};
use crate::error::{Error, Result};
use crate::estimate::DegradationParam;
use crate::image::ImageBuffer;
use crate::io::{decode_mask_png, decode_png, encode_mask_png, encode_png};
use crate::jpeg::QuantTables;

pub const PROJECT_SCHEMA: &str = "objrestore-project";
pub const PROJECT_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";
pub const SOURCE_NAME: &str = "source.png";
/// Cap on any single archive member, against decompression bombs.
pub const MAX_MEMBER_BYTES: u64 = 512 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerManifest {
    pub id: String,
    pub mask: String,
    pub task: LayerTask,
    #[serde(default)]
    pub predicted: Option<DegradationParam>,
    #[serde(default, rename = "override")]
    pub override_param: Option<DegradationParam>,
    pub strength: f64,
    #[serde(default)]
    pub enhance: EnhanceSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub schema_version: u32,
    pub source: String,
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quant_tables: Option<QuantTables>,
    pub layers: Vec<LayerManifest>,
}

/// A source image and its ordered layer stack.
#[derive(Clone, Debug, PartialEq)]
pub struct Project {
    source: ImageBuffer,
    /// Tables of the original upload when it was a JPEG.
    pub quant_tables: Option<QuantTables>,
    pub layers: Vec<ObjectLayer>,
}

fn mask_path(id: &str) -> String {
    format!("masks/{id}.png")
}

impl Project {
    /// Starts a project; the source is snapped to 8 bits so it survives PNG storage.
    pub fn new(source: ImageBuffer, quant_tables: Option<QuantTables>) -> Result<Self> {
        source.validate()?;
        let source = match source.colorspace() {
            crate::ColorSpace::Srgb => source,
            _ => crate::color::convert_colorspace(&source, crate::ColorSpace::Srgb)?,
        };
        Ok(Project {
            source: source.quantize_u8(),
            quant_tables,
            layers: Vec::new(),
        })
    }

    pub fn source(&self) -> &ImageBuffer {
        &self.source
    }

    pub fn layer(&self, id: &str) -> Option<&ObjectLayer> {
        self.layers.iter().find(|l| l.id == id)
    }

    pub fn layer_mut(&mut self, id: &str) -> Option<&mut ObjectLayer> {
        self.layers.iter_mut().find(|l| l.id == id)
    }

    pub fn add_layer(&mut self, layer: ObjectLayer) -> Result<()> {
        if self.layer(&layer.id).is_some() {
            return Err(Error::invalid(format!("duplicate layer id {:?}", layer.id)));
        }
        layer.validate(&self.source)?;
        self.layers.push(layer);
        Ok(())
    }

    pub fn composite(&mut self) -> Result<ImageBuffer> {
        composite(&self.source, &mut self.layers)
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            schema: PROJECT_SCHEMA.into(),
            schema_version: PROJECT_SCHEMA_VERSION,
            source: SOURCE_NAME.into(),
            width: self.source.width(),
            height: self.source.height(),
            quant_tables: self.quant_tables,
            layers: self
                .layers
                .iter()
                .map(|l| LayerManifest {
                    id: l.id.clone(),
                    mask: mask_path(&l.id),
                    task: l.task,
                    predicted: l.predicted.clone(),
                    override_param: l.override_param.clone(),
                    strength: l.strength,
                    enhance: l.enhance,
                })
                .collect(),
        }
    }

    /// Every file of the project as `(relative path, bytes)`.
    pub fn files(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let manifest = serde_json::to_vec_pretty(&self.manifest()).expect("manifest serialises");
        let mut files = vec![
            (MANIFEST_NAME.to_string(), manifest),
            (SOURCE_NAME.to_string(), encode_png(&self.source)?),
        ];
        for l in &self.layers {
            files.push((mask_path(&l.id), encode_mask_png(l.mask())?));
        }
        Ok(files)
    }

    /// Rebuilds a project from a member lookup, validating every reference.
    pub fn from_files(mut read: impl FnMut(&str) -> Result<Vec<u8>>) -> Result<Self> {
        let manifest: Manifest = serde_json::from_slice(&read(MANIFEST_NAME)?)
            .map_err(|e| Error::parse(0, format!("{MANIFEST_NAME}: {e}")))?;
        if manifest.schema != PROJECT_SCHEMA {
            return Err(Error::parse(
                0,
                format!("unknown project schema {:?}", manifest.schema),
            ));
        }
        if manifest.schema_version == 0 || manifest.schema_version > PROJECT_SCHEMA_VERSION {
            return Err(Error::UnsupportedFormat(format!(
                "project schema version {} (supported: {PROJECT_SCHEMA_VERSION})",
                manifest.schema_version
            )));
        }
        if manifest.source != SOURCE_NAME {
            return Err(Error::parse(0, format!("source must be {SOURCE_NAME:?}")));
        }
        let source = decode_png(&read(SOURCE_NAME)?)?;
        if source.width() != manifest.width || source.height() != manifest.height {
            return Err(Error::parse(0, "source dimensions disagree with manifest"));
        }
        let mut project = Project::new(source, manifest.quant_tables)?;
        for lm in manifest.layers {
            if !valid_layer_id(&lm.id) {
                return Err(Error::parse(0, format!("invalid layer id {:?}", lm.id)));
            }
            if lm.mask != mask_path(&lm.id) {
                return Err(Error::parse(
                    0,
                    format!("layer {}: mask path must be {:?}", lm.id, mask_path(&lm.id)),
                ));
            }
            let mask = decode_mask_png(&read(&lm.mask)?)?;
            let mut layer = ObjectLayer::new(lm.id, mask)?;
            layer.task = lm.task;
            layer.predicted = lm.predicted.map(DegradationParam::validated).transpose()?;
            layer.override_param = lm
                .override_param
                .map(DegradationParam::validated)
                .transpose()?;
            layer.strength = lm.strength;
            layer.enhance = lm.enhance;
            project.add_layer(layer)?;
        }
        Ok(project)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("masks"))?;
        for (name, bytes) in self.files()? {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        Project::from_files(|name| {
            let path = dir.join(name);
            let len = std::fs::metadata(&path)?.len();
            if len > MAX_MEMBER_BYTES {
                return Err(Error::invalid(format!(
                    "{name} exceeds {MAX_MEMBER_BYTES} bytes"
                )));
            }
            Ok(std::fs::read(path)?)
        })
    }

    pub fn to_zip(&self) -> Result<Vec<u8>> {
        let mut zip = zip::ZipWriter::new(Cursor::new(Vec::new()));
        let options = zip::write::SimpleFileOptions::default()
            .compression_method(zip::CompressionMethod::Deflated);
        for (name, bytes) in self.files()? {
            zip.start_file(name, options).map_err(zip_error)?;
            zip.write_all(&bytes)?;
        }
        Ok(zip.finish().map_err(zip_error)?.into_inner())
    }

    pub fn from_zip(bytes: &[u8]) -> Result<Self> {
        let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(zip_error)?;
        Project::from_files(|name| {
            let file = archive.by_name(name).map_err(zip_error)?;
            if file.size() > MAX_MEMBER_BYTES {
                return Err(Error::invalid(format!(
                    "{name} exceeds {MAX_MEMBER_BYTES} bytes"
                )));
            }
            let mut out = Vec::with_capacity(file.size() as usize);
            file.take(MAX_MEMBER_BYTES + 1).read_to_end(&mut out)?;
            if out.len() as u64 > MAX_MEMBER_BYTES {
                return Err(Error::invalid(format!(
                    "{name} exceeds {MAX_MEMBER_BYTES} bytes"
                )));
            }
            Ok(out)
        })
    }

    /// Saves as a zip when the path ends in `.zip`, otherwise as a directory.
    pub fn save(&self, path: &Path) -> Result<()> {
        if is_zip_path(path) {
            Ok(std::fs::write(path, self.to_zip()?)?)
        } else {
            self.save_dir(path)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        if path.is_dir() {
            Project::load_dir(path)
        } else {
            Project::from_zip(&std::fs::read(path)?)
        }
    }
}

fn is_zip_path(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("zip"))
}

fn zip_error(e: zip::result::ZipError) -> Error {
    match e {
        zip::result::ZipError::Io(io) => Error::Io(io),
        zip::result::ZipError::FileNotFound => {
            Error::parse(0, "project archive is missing a member")
        }
        other => Error::parse(0, format!("project archive: {other}")),
    }
}
