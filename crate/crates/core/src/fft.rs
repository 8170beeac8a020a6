//! Two-dimensional FFT on row-major complex buffers.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place 2-D DFT of a `width x height` row-major buffer.
///
/// The inverse transform is unnormalised; divide by `width * height`.
pub fn fft2(data: &mut [Complex64], width: usize, height: usize, inverse: bool) {
    assert_eq!(data.len(), width * height);
    let mut planner = FftPlanner::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(width)
    } else {
        planner.plan_fft_forward(width)
    };
    row_fft.process(data);

    let col_fft = if inverse {
        planner.plan_fft_inverse(height)
    } else {
        planner.plan_fft_forward(height)
    };
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[y * width + x];
        }
        col_fft.process(&mut column);
        for y in 0..height {
            data[y * width + x] = column[y];
        }
    }
}

/// Embeds a centred square kernel into a `width x height` frame with its
/// centre at the origin (wrapping negative offsets).
pub fn kernel_to_frame(
    weights: &[f64],
    size: usize,
    width: usize,
    height: usize,
) -> Vec<Complex64> {
    let r = (size / 2) as isize;
    let mut frame = vec![Complex64::new(0.0, 0.0); width * height];
    for ky in 0..size {
        for kx in 0..size {
            let dy = ky as isize - r;
            let dx = kx as isize - r;
            let y = dy.rem_euclid(height as isize) as usize;
            let x = dx.rem_euclid(width as isize) as usize;
            frame[y * width + x] += weights[ky * size + kx];
        }
    }
    frame
}
