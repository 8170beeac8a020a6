use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Colour-space tag carried by every [`ImageBuffer`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    /// Gamma-encoded sRGB. One channel means gamma-encoded gray.
    Srgb,
    /// Linear-light luminance, one channel.
    LinearGray,
    /// CIE L*a*b* (D65). Samples use native ranges: L in [0,100], a/b roughly [-128,128].
    Lab,
}

impl ColorSpace {
    fn is_unit_range(self) -> bool {
        !matches!(self, ColorSpace::Lab)
    }
}

/// Planar floating-point raster.
///
/// `data` holds `channels` planes back to back, each `width * height`
/// samples in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    colorspace: ColorSpace,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        colorspace: ColorSpace,
        data: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be non-zero"));
        }
        match (colorspace, channels) {
            (ColorSpace::Srgb, 1 | 3) | (ColorSpace::LinearGray, 1) | (ColorSpace::Lab, 3) => {}
            _ => {
                return Err(Error::invalid(format!(
                    "{channels} channel(s) not valid for {colorspace:?}"
                )))
            }
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::invalid("image dimensions overflow"))?;
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        let img = ImageBuffer {
            width,
            height,
            channels,
            colorspace,
            data,
        };
        img.validate()?;
        Ok(img)
    }

    /// Image with every sample set to `value`.
    pub fn filled(
        width: usize,
        height: usize,
        channels: usize,
        colorspace: ColorSpace,
        value: f64,
    ) -> Result<Self> {
        let len = width * height * channels;
        Self::new(width, height, channels, colorspace, vec![value; len])
    }

    /// Builds an image from `f(channel, x, y)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        colorspace: ColorSpace,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self::new(width, height, channels, colorspace, data)
    }

    /// Assembles an image from per-channel planes.
    pub fn from_planes(
        width: usize,
        height: usize,
        colorspace: ColorSpace,
        planes: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let channels = planes.len();
        let data = planes.concat();
        Self::new(width, height, channels, colorspace, data)
    }

    /// Checks the sample invariants: finite, and in `[0,1]` outside Lab.
    pub fn validate(&self) -> Result<()> {
        let unit = self.colorspace.is_unit_range();
        for (i, &v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite sample at index {i}")));
            }
            if unit && !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "sample {v} at index {i} outside [0,1]"
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.pixel_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn planes(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.pixel_count())
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[c * self.pixel_count() + y * self.width + x]
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Applies `f` to every sample, then clamps to `[0,1]` for unit-range spaces.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ImageBuffer {
        let unit = self.colorspace.is_unit_range();
        let data = self
            .data
            .iter()
            .map(|&v| {
                let o = f(v);
                if unit {
                    o.clamp(0.0, 1.0)
                } else {
                    o
                }
            })
            .collect();
        ImageBuffer {
            data,
            ..self.clone()
        }
    }

    /// Replaces the sample vector, clamping to `[0,1]` where required.
    pub(crate) fn with_data(&self, mut data: Vec<f64>) -> ImageBuffer {
        debug_assert_eq!(data.len(), self.data.len());
        if self.colorspace.is_unit_range() {
            for v in &mut data {
                *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            }
        }
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: self.channels,
            colorspace: self.colorspace,
            data,
        }
    }

    /// Rounds every sample to the nearest multiple of 1/255.
    pub fn quantize_u8(&self) -> ImageBuffer {
        self.map(|v| (v * 255.0).round() / 255.0)
    }

    /// Nearest-multiple-of-1/255 samples as bytes, interleaved per pixel.
    pub fn to_interleaved_u8(&self) -> Vec<u8> {
        let n = self.pixel_count();
        let mut out = Vec::with_capacity(n * self.channels);
        for i in 0..n {
            for c in 0..self.channels {
                out.push((self.data[c * n + i] * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
        out
    }

    /// Inverse of [`Self::to_interleaved_u8`].
    pub fn from_interleaved_u8(
        width: usize,
        height: usize,
        channels: usize,
        bytes: &[u8],
    ) -> Result<Self> {
        if bytes.len() != width * height * channels {
            return Err(Error::invalid("byte length does not match dimensions"));
        }
        let n = width * height;
        let mut data = vec![0.0; n * channels];
        for i in 0..n {
            for c in 0..channels {
                data[c * n + i] = bytes[i * channels + c] as f64 / 255.0;
            }
        }
        Self::new(width, height, channels, ColorSpace::Srgb, data)
    }

    /// Box-filter downscale so that neither side exceeds `max_dim`.
    pub fn downscale_to_fit(&self, max_dim: usize) -> ImageBuffer {
        let longest = self.width.max(self.height);
        if longest <= max_dim || max_dim == 0 {
            return self.clone();
        }
        let scale = max_dim as f64 / longest as f64;
        let nw = ((self.width as f64 * scale).round() as usize).max(1);
        let nh = ((self.height as f64 * scale).round() as usize).max(1);
        let mut data = Vec::with_capacity(nw * nh * self.channels);
        for c in 0..self.channels {
            let plane = self.plane(c);
            for oy in 0..nh {
                let y0 = oy * self.height / nh;
                let y1 = ((oy + 1) * self.height / nh).max(y0 + 1);
                for ox in 0..nw {
                    let x0 = ox * self.width / nw;
                    let x1 = ((ox + 1) * self.width / nw).max(x0 + 1);
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        for x in x0..x1 {
                            acc += plane[y * self.width + x];
                        }
                    }
                    data.push(acc / ((y1 - y0) * (x1 - x0)) as f64);
                }
            }
        }
        ImageBuffer {
            width: nw,
            height: nh,
            channels: self.channels,
            colorspace: self.colorspace,
            data,
        }
    }
}

/// Soft single-channel coverage raster, alpha in `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    alpha: Vec<f64>,
}

impl Mask {
    pub fn new(width: usize, height: usize, alpha: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask dimensions must be non-zero"));
        }
        if alpha.len() != width * height {
            return Err(Error::invalid("mask length does not match dimensions"));
        }
        if let Some(bad) = alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::invalid(format!("mask alpha {bad} outside [0,1]")));
        }
        Ok(Mask {
            width,
            height,
            alpha,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut alpha = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                alpha.push(f(x, y));
            }
        }
        Self::new(width, height, alpha)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.alpha[y * self.width + x]
    }

    pub fn matches(&self, img: &ImageBuffer) -> bool {
        self.width == img.width() && self.height == img.height()
    }

    /// Count of pixels with alpha strictly above 0.5.
    pub fn hard_count(&self) -> usize {
        self.alpha.iter().filter(|&&a| a > 0.5).count()
    }

    /// Rounds alpha to multiples of 1/255 so the mask survives an 8-bit PNG round trip.
    pub fn quantize_u8(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            alpha: self
                .alpha
                .iter()
                .map(|&a| (a * 255.0).round() / 255.0)
                .collect(),
        }
    }
}

/// Binary mask, the pre-feather output of segmentation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::invalid(
                "binary mask length does not match dimensions",
            ));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMask {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_mask(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            alpha: self
                .bits
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    /// Intersection-over-union with another mask of the same shape.
    pub fn iou(&self, other: &BinaryMask) -> f64 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Square convolution kernel with odd side length.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2D {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel2D {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::invalid(format!("kernel size {size} must be odd")));
        }
        if weights.len() != size * size {
            return Err(Error::invalid("kernel weight count does not match size"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("kernel weights must be finite"));
        }
        Ok(Kernel2D { size, weights })
    }

    /// Unit impulse of the given (odd) size.
    pub fn delta(size: usize) -> Result<Self> {
        let mut weights = vec![0.0; size * size];
        if let Some(w) = weights.get_mut(size * size / 2) {
            *w = 1.0;
        }
        Self::new(size, weights)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.size + col]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Isotropic Gaussian taps sampled at integer offsets and normalised to sum 1.
pub fn gaussian_kernel(sigma: f64, size: usize) -> Result<Kernel2D> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if size < 3 || size.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "kernel size must be odd and >= 3, got {size}"
        )));
    }
    let taps = gaussian_taps_1d(sigma, size / 2);
    let mut weights = Vec::with_capacity(size * size);
    for wy in &taps {
        for wx in &taps {
            weights.push(wy * wx);
        }
    }
    Kernel2D::new(size, weights)
}

/// Normalised 1-D Gaussian taps for offsets `-radius..=radius`.
pub(crate) fn gaussian_taps_1d(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Reflect-101 index folding (`dcb|abcd|cba`), valid for any offset.
#[inline]
pub fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_folds_both_sides() {
        let idx: Vec<usize> = (-3..7).map(|i| reflect101(i, 4)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
        assert_eq!(reflect101(-5, 1), 0);
    }

    #[test]
    fn image_rejects_bad_lengths_and_ranges() {
        assert!(ImageBuffer::new(2, 2, 1, ColorSpace::Srgb, vec![0.0; 3]).is_err());
        assert!(ImageBuffer::new(1, 1, 1, ColorSpace::Srgb, vec![1.5]).is_err());
        assert!(ImageBuffer::new(1, 1, 1, ColorSpace::Srgb, vec![f64::NAN]).is_err());
        assert!(ImageBuffer::new(1, 1, 3, ColorSpace::Lab, vec![50.0, -20.0, 30.0]).is_ok());
        assert!(ImageBuffer::new(1, 1, 3, ColorSpace::LinearGray, vec![0.0; 3]).is_err());
    }

    #[test]
    fn gaussian_kernel_errors() {
        assert!(gaussian_kernel(0.0, 15).is_err());
        assert!(gaussian_kernel(-1.0, 15).is_err());
        assert!(gaussian_kernel(1.0, 14).is_err());
        assert!(gaussian_kernel(1.0, 1).is_err());
    }

    #[test]
    fn gaussian_kernel_near_delta() {
        let k = gaussian_kernel(0.1, 15).unwrap();
        assert!((k.at(7, 7) - 1.0).abs() < 1e-10);
        for (i, &w) in k.weights().iter().enumerate() {
            if i != 112 {
                assert!(w < 1e-10);
            }
        }
    }

    #[test]
    fn gaussian_kernel_matches_direct_formula() {
        let sigma: f64 = 1.5;
        let k = gaussian_kernel(sigma, 15).unwrap();
        let mut raw = [[0.0f64; 15]; 15];
        let mut total = 0.0;
        for (i, row) in raw.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let dx = j as f64 - 7.0;
                let dy = i as f64 - 7.0;
                *v = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                total += *v;
            }
        }
        for i in 0..15 {
            for j in 0..15 {
                assert!((k.at(i, j) - raw[i][j] / total).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_kernel_symmetry_is_exact() {
        for &sigma in &[0.3, 1.0, 2.2, 3.0] {
            let k = gaussian_kernel(sigma, 15).unwrap();
            let s = k.size();
            let max = k.weights().iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(k.at(7, 7), max);
            for i in 0..s {
                for j in 0..s {
                    assert_eq!(k.at(i, j), k.at(j, i));
                    assert_eq!(k.at(i, j), k.at(s - 1 - i, j));
                }
            }
            assert!((k.sum() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn downscale_box_average() {
        let img = ImageBuffer::from_fn(
            4,
            2,
            1,
            ColorSpace::Srgb,
            |_, x, _| if x < 2 { 0.0 } else { 1.0 },
        )
        .unwrap();
        let small = img.downscale_to_fit(2);
        assert_eq!((small.width(), small.height()), (2, 1));
        assert_eq!(small.data(), &[0.0, 1.0]);
    }

    #[test]
    fn iou_of_identical_masks_is_one() {
        let a = BinaryMask::from_fn(8, 8, |x, _| x < 4);
        let b = BinaryMask::from_fn(8, 8, |x, _| x < 2);
        assert_eq!(a.iou(&a), 1.0);
        assert!((a.iou(&b) - 0.5).abs() < 1e-12);
    }
}
