//! Layer stack, per-object enhancement, compositing, export and project files.
//!
//! Each layer restores and enhances the full source frame, then its mask
//! decides where that patch shows. Layers are applied in stack order, so
//! the last layer wins where masks overlap.

mod composite;
mod enhance;
mod export;
mod layer;
mod project;

pub use composite::{composite, composite_uncached};
pub use enhance::{apply_enhance, EnhanceSettings};
pub use export::{export_image, ExportFormat, MIN_UNFORCED_JPEG_QUALITY};
pub use layer::{valid_layer_id, CachedPatch, LayerTask, ObjectLayer, PatchKey};
pub use project::{
    LayerManifest, Manifest, Project, MANIFEST_NAME, MAX_MEMBER_BYTES, PROJECT_SCHEMA,
    PROJECT_SCHEMA_VERSION, SOURCE_NAME,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::apply_awgn;
    use crate::estimate::DegradationParam;
    use crate::fixtures;
    use crate::image::{BinaryMask, Mask};

    fn noisy_source() -> ImageBuffer {
        apply_awgn(&fixtures::natural(5, 48, 40), 20.0, 1)
            .unwrap()
            .quantize_u8()
    }

    use crate::image::ImageBuffer;

    fn denoise_layer(id: &str, mask: Mask, strength: f64) -> ObjectLayer {
        let mut l = ObjectLayer::new(id, mask).unwrap();
        l.task = LayerTask::Denoise;
        l.predicted = Some(DegradationParam::noise(20.0, 0.9).unwrap());
        l.strength = strength;
        l
    }

    #[test]
    fn empty_stack_and_identity_layer() {
        let src = noisy_source();
        assert_eq!(composite(&src, &mut []).unwrap(), src);
        let mut layers = vec![ObjectLayer::new("a", Mask::filled(48, 40, 1.0).unwrap()).unwrap()];
        assert_eq!(composite(&src, &mut layers).unwrap(), src);
    }

    #[test]
    fn cache_is_bit_identical() {
        let src = noisy_source();
        let mut layers = vec![denoise_layer(
            "a",
            fixtures::half_plane(48, 40).to_mask(),
            1.2,
        )];
        layers[0].enhance.brightness = 0.05;
        let uncached = composite_uncached(&src, &layers).unwrap();
        let first = composite(&src, &mut layers).unwrap();
        assert!(layers[0].cached_patch.is_some());
        let second = composite(&src, &mut layers).unwrap();
        assert_eq!(first, uncached);
        assert_eq!(second, uncached);
        layers[0].strength = 0.4;
        assert_eq!(
            composite(&src, &mut layers).unwrap(),
            composite_uncached(&src, &layers).unwrap()
        );
    }

    #[test]
    fn override_must_match_prediction_kind() {
        let src = noisy_source();
        let mut l = denoise_layer("a", Mask::filled(48, 40, 1.0).unwrap(), 1.0);
        l.override_param = Some(DegradationParam::jpeg(40, 1.0).unwrap());
        assert!(l.validate(&src).is_err());
    }

    #[test]
    fn project_round_trips_dir_and_zip() {
        let mut p = Project::new(noisy_source(), None).unwrap();
        let right = BinaryMask::from_fn(48, 40, |x, _| x >= 24);
        p.add_layer(denoise_layer(
            "left",
            crate::segment::feather(&fixtures::half_plane(48, 40), 3.0).unwrap(),
            1.5,
        ))
        .unwrap();
        let mut r = denoise_layer("right", right.to_mask(), 0.5);
        r.override_param = Some(DegradationParam::noise(12.5, 1.0).unwrap());
        r.enhance.contrast = 1.3;
        p.add_layer(r).unwrap();
        let expected = p.composite().unwrap();

        let dir = tempfile::tempdir().unwrap();
        p.save(dir.path()).unwrap();
        let mut from_dir = Project::load(dir.path()).unwrap();
        assert_eq!(from_dir.composite().unwrap(), expected);

        let mut from_zip = Project::from_zip(&p.to_zip().unwrap()).unwrap();
        assert_eq!(from_zip.composite().unwrap(), expected);
        assert_eq!(from_zip.manifest(), p.manifest());
    }

    #[test]
    fn project_rejects_future_schema_and_bad_ids() {
        let p = Project::new(noisy_source(), None).unwrap();
        let files = p.files().unwrap();
        let lookup = |files: Vec<(String, Vec<u8>)>| {
            move |name: &str| {
                files
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, b)| b.clone())
                    .ok_or_else(|| crate::Error::invalid("missing"))
            }
        };
        let mut future = files.clone();
        let mut m: serde_json::Value = serde_json::from_slice(&future[0].1).unwrap();
        m["schema_version"] = 2.into();
        future[0].1 = serde_json::to_vec(&m).unwrap();
        assert!(matches!(
            Project::from_files(lookup(future)),
            Err(crate::Error::UnsupportedFormat(_))
        ));

        let mut evil = files;
        let mut m: serde_json::Value = serde_json::from_slice(&evil[0].1).unwrap();
        m["layers"] = serde_json::json!([{"id": "../x", "mask": "masks/../x.png", "task": "none", "strength": 1.0}]);
        evil[0].1 = serde_json::to_vec(&m).unwrap();
        assert!(Project::from_files(lookup(evil)).is_err());
    }
}
