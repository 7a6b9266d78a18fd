//! 2-D FFT helpers on row-major complex grids.
//!
//! Forward transforms are unnormalized, inverse transforms divide by the
//! sample count. Plans come from a per-thread planner so concurrent callers
//! never contend on a shared cache.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: Direction) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        match direction {
            Direction::Forward => planner.plan_fft_forward(len),
            Direction::Inverse => planner.plan_fft_inverse(len),
        }
    })
}

const ROWS_PER_JOB: usize = 32;

fn transform_rows(data: &mut [Complex64], len: usize, direction: Direction) {
    let fft = plan(len, direction);
    data.par_chunks_mut(len * ROWS_PER_JOB).for_each(|rows| fft.process(rows));
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], width: usize, height: usize) {
    for (row, line) in src.chunks_exact(width).enumerate() {
        for (col, v) in line.iter().enumerate() {
            dst[col * height + row] = *v;
        }
    }
}

fn transform(data: &mut [Complex64], width: usize, height: usize, direction: Direction) {
    assert_eq!(data.len(), width * height, "grid size mismatch");
    transform_rows(data, width, direction);
    if height > 1 {
        let mut scratch = vec![Complex64::new(0.0, 0.0); data.len()];
        transpose(data, &mut scratch, width, height);
        transform_rows(&mut scratch, height, direction);
        transpose(&scratch, data, height, width);
    }
}

pub(crate) fn fft2(data: &mut [Complex64], width: usize, height: usize) {
    transform(data, width, height, Direction::Forward);
}

pub(crate) fn ifft2(data: &mut [Complex64], width: usize, height: usize) {
    transform(data, width, height, Direction::Inverse);
    let scale = 1.0 / (width * height) as f64;
    data.par_iter_mut().for_each(|v| *v *= scale);
}

/// Moves the zero-frequency sample from index 0 to index `n / 2` on both axes.
pub(crate) fn fftshift(data: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let (hx, hy) = (width / 2, height / 2);
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for row in 0..height {
        let dst_row = (row + hy) % height;
        for col in 0..width {
            out[dst_row * width + (col + hx) % width] = data[row * width + col];
        }
    }
    out
}

/// Inverse of [`fftshift`]: moves index `n / 2` back to index 0.
pub(crate) fn ifftshift(data: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let (hx, hy) = (width / 2, height / 2);
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for row in 0..height {
        let src_row = (row + hy) % height;
        for col in 0..width {
            out[row * width + col] = data[src_row * width + (col + hx) % width];
        }
    }
    out
}

/// Signed integer frequency index of DFT bin `i` of an `n`-point transform.
pub(crate) fn signed_index(i: usize, n: usize) -> f64 {
    if i < n.div_ceil(2) {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft2(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); w * h];
        for ky in 0..h {
            for kx in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let phase = -2.0 * std::f64::consts::PI
                            * ((kx * x) as f64 / w as f64 + (ky * y) as f64 / h as f64);
                        acc += data[y * w + x] * Complex64::from_polar(1.0, phase);
                    }
                }
                out[ky * w + kx] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_on_odd_rectangle() {
        let (w, h) = (5, 3);
        let data: Vec<_> = (0..w * h).map(|i| Complex64::new(i as f64, (i * i % 7) as f64)).collect();
        let mut fast = data.clone();
        fft2(&mut fast, w, h);
        for (a, b) in fast.iter().zip(naive_dft2(&data, w, h)) {
            assert!((a - b).norm() < 1e-9);
        }
        ifft2(&mut fast, w, h);
        for (a, b) in fast.iter().zip(&data) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn shifts_are_inverse() {
        for (w, h) in [(4, 4), (5, 3), (1, 7)] {
            let data: Vec<_> = (0..w * h).map(|i| Complex64::new(i as f64, 0.0)).collect();
            assert_eq!(ifftshift(&fftshift(&data, w, h), w, h), data);
        }
        let data: Vec<_> = (0..5).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let shifted = fftshift(&data, 5, 1);
        assert_eq!(shifted[2].re, 0.0);
    }

    #[test]
    fn signed_indices() {
        let got: Vec<_> = (0..5).map(|i| signed_index(i, 5)).collect();
        assert_eq!(got, vec![0.0, 1.0, 2.0, -2.0, -1.0]);
        let got: Vec<_> = (0..4).map(|i| signed_index(i, 4)).collect();
        assert_eq!(got, vec![0.0, 1.0, -2.0, -1.0]);
    }
}
