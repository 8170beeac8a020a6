//! Per-object interactive image restoration.
//!
//! The pipeline has three stages. An object is selected from click prompts
//! ([`segment`]), its degradation parameter is predicted blindly
//! ([`estimate`]) and used, optionally overridden by the user, to drive a
//! controllable restorer ([`restore`]). Restored objects are then enhanced
//! and composited back over the source image ([`compose`]).
//!
//! All pixel data is carried in [`ImageBuffer`], a planar `f64` raster with
//! samples in `[0, 1]`.

pub mod color;
pub mod compose;
pub mod conv;
pub mod degrade;
mod error;
pub mod estimate;
pub mod fft;
pub mod fixtures;
mod image;
pub mod io;
pub mod jpeg;
pub mod kv;
pub mod metrics;
pub mod restore;
pub mod segment;

pub use crate::error::{Error, Result};
pub use crate::image::{
    gaussian_kernel, reflect101, BinaryMask, ColorSpace, ImageBuffer, Kernel2D, Mask,
};
