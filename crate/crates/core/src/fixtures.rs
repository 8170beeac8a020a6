//! Deterministic synthetic images used by tests, calibration and the bench harness.
//!
//! The "natural" generator composes a smooth two-colour gradient, a
//! low-frequency colour field, a handful of soft-edged shapes and a faint
//! `1/f` luminance texture, then quantises to 8 bits. Its spectrum falls off
//! like photographs of ordinary scenes, which is what the restoration gates
//! are calibrated against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::color::lab_to_srgb;
use crate::fft::fft2;
use crate::image::{BinaryMask, ColorSpace, ImageBuffer};

/// Seeds of the three natural test images used by the gates.
pub const NATURAL_SEEDS: [u64; 3] = [11, 23, 37];

/// Zero-mean, unit-variance random field with amplitude spectrum `f^-alpha`.
pub fn spectral_field(seed: u64, w: usize, h: usize, alpha: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![Complex64::new(0.0, 0.0); w * h];
    for y in 0..h {
        let fy = if y <= h / 2 {
            y as f64
        } else {
            y as f64 - h as f64
        };
        for x in 0..w {
            let fx = if x <= w / 2 {
                x as f64
            } else {
                x as f64 - w as f64
            };
            let f = (fx * fx + fy * fy).sqrt();
            let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let amp = if f == 0.0 { 0.0 } else { f.powf(-alpha) };
            buf[y * w + x] = Complex64::from_polar(amp, phase);
        }
    }
    fft2(&mut buf, w, h, true);
    let re: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = re.iter().sum::<f64>() / re.len() as f64;
    let var = re.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / re.len() as f64;
    let sd = var.sqrt().max(1e-12);
    re.into_iter().map(|v| (v - mean) / sd).collect()
}

fn smoothstep(edge0: f64, edge1: f64, x: f64) -> f64 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Natural-statistics RGB test image, 8-bit quantised.
pub fn natural(seed: u64, w: usize, h: usize) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c0: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.2..0.8));
    let c1: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.2..0.8));
    let angle: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let (dx, dy) = (angle.cos(), angle.sin());

    let fields: Vec<Vec<f64>> = (0..3)
        .map(|c| spectral_field(seed.wrapping_mul(31).wrapping_add(c), w, h, 2.0))
        .collect();
    let texture = spectral_field(seed.wrapping_mul(131).wrapping_add(7), w, h, 1.0);

    struct Shape {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
        color: [f64; 3],
        boxy: bool,
    }
    let nshapes = rng.random_range(5..9);
    let shapes: Vec<Shape> = (0..nshapes)
        .map(|_| Shape {
            cx: rng.random_range(0.0..w as f64),
            cy: rng.random_range(0.0..h as f64),
            rx: rng.random_range(0.08..0.3) * w as f64,
            ry: rng.random_range(0.08..0.3) * h as f64,
            color: std::array::from_fn(|_| rng.random_range(0.1..0.9)),
            boxy: rng.random_bool(0.3),
        })
        .collect();

    let mut planes = vec![vec![0.0; w * h]; 3];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let t = (((x as f64 / w as f64 - 0.5) * dx + (y as f64 / h as f64 - 0.5) * dy) + 0.5)
                .clamp(0.0, 1.0);
            let mut px: [f64; 3] =
                std::array::from_fn(|c| c0[c] * (1.0 - t) + c1[c] * t + 0.06 * fields[c][i]);
            for s in &shapes {
                let ux = (x as f64 - s.cx) / s.rx;
                let uy = (y as f64 - s.cy) / s.ry;
                // Signed distance in pixels, approximately.
                let d = if s.boxy {
                    (ux.abs().max(uy.abs()) - 1.0) * s.rx.min(s.ry)
                } else {
                    ((ux * ux + uy * uy).sqrt() - 1.0) * s.rx.min(s.ry)
                };
                let cover = 1.0 - smoothstep(-1.0, 1.0, d);
                if cover > 0.0 {
                    let shade = 1.0 + 0.15 * (uy * 0.8 - ux * 0.3);
                    for c in 0..3 {
                        px[c] = px[c] * (1.0 - cover) + (s.color[c] * shade) * cover;
                    }
                }
            }
            for c in 0..3 {
                planes[c][i] = (px[c] + 0.02 * texture[i]).clamp(0.0, 1.0);
            }
        }
    }
    ImageBuffer::from_planes(w, h, ColorSpace::Srgb, planes)
        .expect("valid by construction")
        .quantize_u8()
}

/// Single-channel checkerboard with the given square size and levels.
pub fn checkerboard(w: usize, h: usize, square: usize, lo: f64, hi: f64) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, 1, ColorSpace::Srgb, |_, x, y| {
        if (x / square + y / square).is_multiple_of(2) {
            lo
        } else {
            hi
        }
    })
    .expect("valid by construction")
}

/// Vertical step edge: `lo` on the left half, `hi` on the right.
pub fn step_edge(w: usize, h: usize, lo: f64, hi: f64) -> ImageBuffer {
    ImageBuffer::from_fn(
        w,
        h,
        1,
        ColorSpace::Srgb,
        |_, x, _| if x < w / 2 { lo } else { hi },
    )
    .expect("valid by construction")
}

/// Colour of the disk and its background; CIE76 distance exactly 30.
pub const DISK_LAB: [f64; 3] = [50.0, 30.0, 0.0];
pub const DISK_BACKGROUND_LAB: [f64; 3] = [50.0, 0.0, 0.0];

/// Disk on a flat background, returned with its ground-truth raster.
pub fn disk(w: usize, h: usize, radius: f64) -> (ImageBuffer, BinaryMask) {
    let fg = lab_to_srgb(DISK_LAB);
    let bg = lab_to_srgb(DISK_BACKGROUND_LAB);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let inside = |x: usize, y: usize| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        dx * dx + dy * dy <= radius * radius
    };
    let img = ImageBuffer::from_fn(w, h, 3, ColorSpace::Srgb, |c, x, y| {
        if inside(x, y) {
            fg[c]
        } else {
            bg[c]
        }
    })
    .expect("valid by construction");
    (img, BinaryMask::from_fn(w, h, inside))
}

/// Smooth left half (gentle gradient) and a high-frequency texture on the right.
///
/// Returns the image and the truth mask of the smooth half.
pub fn two_region(w: usize, h: usize, seed: u64) -> (ImageBuffer, BinaryMask) {
    let texture = spectral_field(seed, w, h, 0.6);
    let half = w / 2;
    let img = ImageBuffer::from_fn(w, h, 1, ColorSpace::Srgb, |_, x, y| {
        if x < half {
            0.35 + 0.3 * (x as f64 / w as f64) + 0.1 * (y as f64 / h as f64)
        } else {
            (0.5 + 0.16 * texture[y * w + x]).clamp(0.0, 1.0)
        }
    })
    .expect("valid by construction")
    .quantize_u8();
    (img, BinaryMask::from_fn(w, h, |x, _| x < half))
}

/// Left-half binary mask.
pub fn half_plane(w: usize, h: usize) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, _| x < w / 2)
}
