use super::layer::ObjectLayer;
use crate::error::Result;
use crate::image::ImageBuffer;
use crate::restore::blend;

/// Blends each layer's patch over the running result in stack order.
///
/// Reuses a layer's cached patch when its inputs are unchanged and fills
/// the cache otherwise; the output is identical either way.
pub fn composite(source: &ImageBuffer, layers: &mut [ObjectLayer]) -> Result<ImageBuffer> {
    let mut out = source.clone();
    for layer in layers.iter_mut() {
        layer.validate(source)?;
        layer.patch(source)?;
        let patch = &layer
            .cached_patch
            .as_ref()
            .expect("filled by patch()")
            .image;
        out = blend(patch, &out, layer.mask());
    }
    Ok(out)
}

/// Composite that ignores and leaves untouched every cache.
pub fn composite_uncached(source: &ImageBuffer, layers: &[ObjectLayer]) -> Result<ImageBuffer> {
    let mut out = source.clone();
    for layer in layers {
        let patch = layer.render_patch(source)?;
        out = blend(&patch, &out, layer.mask());
    }
    Ok(out)
}
