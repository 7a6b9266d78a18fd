use super::{CghError, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    Deterministic,
    /// Each point gets a uniformly random phase, drawn once per point at
    /// stamping time from the LUT seed.
    Random,
}

/// One precomputed point-spread patch, `(2r+1)²` samples, zero outside the
/// circular support.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfKernel {
    pub distance: f64,
    pub radius: usize,
    pub values: Vec<Complex64>,
}

impl PsfKernel {
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Sample at lateral offset `(dy, dx)` pixels from the center.
    pub fn at(&self, dy: isize, dx: isize) -> Complex64 {
        let r = self.radius as isize;
        self.values[((dy + r) as usize) * self.side() + (dx + r) as usize]
    }
}

/// Point-spread look-up table indexed by quantized |point-to-WRP distance|.
/// Negative distances reuse the conjugate of the positive kernel.
#[derive(Debug, Clone)]
pub struct PsfLut {
    pub wavelength: f64,
    pub pitch: f64,
    pub phase_mode: PhaseMode,
    pub seed: u64,
    max_distance: f64,
    step: f64,
    levels: Vec<PsfKernel>,
}

/// Support radius `⌈|dz| tan θmax / p⌉` with `θmax = asin(λ / 2p)`.
pub fn support_radius(wavelength: f64, pitch: f64, dz: f64) -> usize {
    let sin = (wavelength / (2.0 * pitch)).min(1.0);
    let tan = sin / (1.0 - sin * sin).sqrt();
    (dz.abs() * tan / pitch).ceil() as usize
}

fn kernel(wavelength: f64, pitch: f64, distance: f64) -> PsfKernel {
    let radius = if distance == 0.0 { 0 } else { support_radius(wavelength, pitch, distance) };
    let side = 2 * radius + 1;
    let r = radius as isize;
    let mut values = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            let rho2 = (dx * dx + dy * dy) as f64;
            if distance == 0.0 {
                values.push(Complex64::new(1.0, 0.0));
            } else if rho2 <= (r * r) as f64 {
                values.push(Complex64::from_polar(1.0, PI * rho2 * pitch * pitch / (wavelength * distance)));
            } else {
                values.push(Complex64::new(0.0, 0.0));
            }
        }
    }
    PsfKernel { distance, radius, values }
}

pub fn build_lut(
    wavelength: f64,
    pitch: f64,
    slab_halfwidth: f64,
    level_count: usize,
    phase_mode: PhaseMode,
    seed: u64,
) -> Result<PsfLut> {
    if !(wavelength.is_finite() && wavelength > 0.0 && pitch.is_finite() && pitch > 0.0) {
        return Err(CghError::InvalidLut("wavelength and pitch must be positive".into()));
    }
    if level_count == 0 {
        return Err(CghError::InvalidLut("level_count must be at least 1".into()));
    }
    if !(slab_halfwidth.is_finite() && slab_halfwidth >= 0.0) {
        return Err(CghError::InvalidLut("slab half-width must be non-negative".into()));
    }
    let (levels, step) = if level_count == 1 || slab_halfwidth == 0.0 {
        (vec![kernel(wavelength, pitch, 0.0)], 0.0)
    } else {
        let step = slab_halfwidth / (level_count - 1) as f64;
        let levels = (0..level_count)
            .map(|i| kernel(wavelength, pitch, step * i as f64))
            .collect();
        (levels, step)
    };
    Ok(PsfLut {
        wavelength,
        pitch,
        phase_mode,
        seed,
        max_distance: slab_halfwidth,
        step,
        levels,
    })
}

impl PsfLut {
    pub fn levels(&self) -> &[PsfKernel] {
        &self.levels
    }

    pub fn max_distance(&self) -> f64 {
        self.max_distance
    }

    /// Nearest depth level for a signed distance, and whether the kernel must
    /// be conjugated (point in front of the WRP).
    pub fn lookup(&self, dz: f64) -> (&PsfKernel, bool) {
        let idx = if self.step == 0.0 {
            0
        } else {
            ((dz.abs() / self.step).round() as usize).min(self.levels.len() - 1)
        };
        (&self.levels[idx], dz < 0.0)
    }

    pub fn covers(&self, dz: f64) -> bool {
        dz.abs() <= self.max_distance * (1.0 + 1e-9) + 1e-15
    }
}
