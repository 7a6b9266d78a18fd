//! Scalar diffraction: angular spectrum propagation, quadratic Fresnel phase
//! (de)modulation and Fourier-geometry reconstruction.
//!
//! Axial convention: a positive propagation distance moves the field towards
//! the hologram plane. Depth offsets passed to [`refocus`] are measured away
//! from the hologram, so a positive offset focuses behind the scene center.
//!
//! Lateral convention: pixel `(row, col)` sits at
//! `((col - width/2) * pitch, (row - height/2) * pitch)` with integer division,
//! which is the same sample that a centered FFT maps to zero frequency.

use crate::fft;
use crate::field::{ComplexField, FieldError, FieldMetadata, Geometry};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum PropagationError {
    #[error("propagation distance must be finite, got {0}")]
    NonFiniteDistance(f64),
    #[error("Fresnel phase is singular for focal distance {0}")]
    SingularFresnel(f64),
    #[error("field has in-plane geometry; use propagate_asm instead of a Fourier reconstruction")]
    NotFourier,
    #[error("refocusing by {delta_z} from reference distance {reference} puts the focal plane behind the hologram")]
    BehindHologram { reference: f64, delta_z: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type Result<T, E = PropagationError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FresnelDirection {
    Modulate,
    Demodulate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PropagationOptions {
    /// Zero-pad to twice the size in each axis to suppress wraparound.
    pub pad: bool,
}

/// Fractional part of `distance / wavelength`, with the division's rounding
/// error recovered by an FMA so large distances keep sub-ulp phase accuracy.
fn fractional_cycles(distance: f64, wavelength: f64) -> f64 {
    let cycles = distance / wavelength;
    let residual = (-cycles).mul_add(wavelength, distance) / wavelength;
    (cycles - cycles.floor()) + residual
}

/// Angular spectrum transfer function for one distance, in FFT bin order.
#[derive(Debug, Clone)]
pub struct PropagationKernel {
    pub distance: f64,
    width: usize,
    height: usize,
    transfer: Vec<Complex64>,
    propagating: Vec<bool>,
}

impl PropagationKernel {
    pub fn new(width: usize, height: usize, pitch: (f64, f64), wavelength: f64, distance: f64) -> Self {
        let k = 2.0 * PI / wavelength;
        let global = Complex64::from_polar(1.0, 2.0 * PI * fractional_cycles(distance, wavelength));
        let mut transfer = Vec::with_capacity(width * height);
        let mut propagating = Vec::with_capacity(width * height);
        for row in 0..height {
            let ky = 2.0 * PI * fft::signed_index(row, height) / (height as f64 * pitch.1);
            for col in 0..width {
                let kx = 2.0 * PI * fft::signed_index(col, width) / (width as f64 * pitch.0);
                let lateral = kx * kx + ky * ky;
                if lateral <= k * k {
                    let kz = (k * k - lateral).sqrt();
                    // kz - k written to avoid cancellation for small angles
                    let delta = -lateral / (kz + k);
                    transfer.push(global * Complex64::from_polar(1.0, delta * distance));
                    propagating.push(true);
                } else {
                    transfer.push(Complex64::new(0.0, 0.0));
                    propagating.push(false);
                }
            }
        }
        PropagationKernel {
            distance,
            width,
            height,
            transfer,
            propagating,
        }
    }

    pub fn for_field(meta: &FieldMetadata, distance: f64) -> Self {
        Self::new(meta.width, meta.height, (meta.pitch, meta.pitch), meta.wavelength, distance)
    }

    /// Transfer value at FFT bin `(row, col)`.
    pub fn transfer(&self, row: usize, col: usize) -> Complex64 {
        self.transfer[row * self.width + col]
    }

    pub fn is_propagating(&self, row: usize, col: usize) -> bool {
        self.propagating[row * self.width + col]
    }

    pub fn all_propagating(&self) -> bool {
        self.propagating.iter().all(|&p| p)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn apply(&self, spectrum: &mut [Complex64]) {
        spectrum
            .par_iter_mut()
            .zip(self.transfer.par_iter())
            .for_each(|(s, h)| *s *= h);
    }
}

/// Propagates a raw grid in place. Shared by the public API and CGH synthesis.
pub(crate) fn asm_in_place(
    values: &mut [Complex64],
    width: usize,
    height: usize,
    pitch: (f64, f64),
    wavelength: f64,
    distance: f64,
) {
    let kernel = PropagationKernel::new(width, height, pitch, wavelength, distance);
    if distance == 0.0 && kernel.all_propagating() {
        return;
    }
    fft::fft2(values, width, height);
    kernel.apply(values);
    fft::ifft2(values, width, height);
}

fn check_distance(distance: f64) -> Result<()> {
    if distance.is_finite() {
        Ok(())
    } else {
        Err(PropagationError::NonFiniteDistance(distance))
    }
}

pub fn propagate_asm(field: &ComplexField, distance: f64) -> Result<ComplexField> {
    propagate_asm_with(field, distance, PropagationOptions::default())
}

pub fn propagate_asm_with(field: &ComplexField, distance: f64, options: PropagationOptions) -> Result<ComplexField> {
    check_distance(distance)?;
    let meta = field.meta();
    let (w, h) = (meta.width, meta.height);
    let pitch = (meta.pitch, meta.pitch);
    let values = if options.pad {
        let (pw, ph) = (2 * w, 2 * h);
        let (ox, oy) = (w / 2, h / 2);
        let mut padded = vec![Complex64::new(0.0, 0.0); pw * ph];
        for row in 0..h {
            padded[(row + oy) * pw + ox..(row + oy) * pw + ox + w]
                .copy_from_slice(&field.values()[row * w..(row + 1) * w]);
        }
        asm_in_place(&mut padded, pw, ph, pitch, meta.wavelength, distance);
        let mut out = Vec::with_capacity(w * h);
        for row in 0..h {
            out.extend_from_slice(&padded[(row + oy) * pw + ox..(row + oy) * pw + ox + w]);
        }
        out
    } else {
        let mut values = field.values().to_vec();
        asm_in_place(&mut values, w, h, pitch, meta.wavelength, distance);
        values
    };
    let note = format!("asm z={distance:e}{}", if options.pad { " padded" } else { "" });
    Ok(ComplexField::from_parts(meta.clone().with_note(note), values))
}

/// Quadratic phase `exp(iπ(x²+y²)/(λd))` sampled on the pixel grid.
#[derive(Debug, Clone, Copy)]
pub struct FresnelPhase {
    pub focal_distance: f64,
    pub wavelength: f64,
    pub pitch: (f64, f64),
    pub width: usize,
    pub height: usize,
}

impl FresnelPhase {
    pub fn new(meta: &FieldMetadata, focal_distance: f64) -> Result<Self> {
        if focal_distance == 0.0 || !focal_distance.is_finite() {
            return Err(PropagationError::SingularFresnel(focal_distance));
        }
        Ok(FresnelPhase {
            focal_distance,
            wavelength: meta.wavelength,
            pitch: (meta.pitch, meta.pitch),
            width: meta.width,
            height: meta.height,
        })
    }

    pub fn value(&self, row: usize, col: usize) -> Complex64 {
        let x = (col as f64 - (self.width / 2) as f64) * self.pitch.0;
        let y = (row as f64 - (self.height / 2) as f64) * self.pitch.1;
        Complex64::from_polar(1.0, PI * (x * x + y * y) / (self.wavelength * self.focal_distance))
    }

    fn multiply(&self, values: &mut [Complex64], conjugate: bool) {
        let width = self.width;
        values.par_chunks_mut(width).enumerate().for_each(|(row, line)| {
            for (col, v) in line.iter_mut().enumerate() {
                let f = self.value(row, col);
                *v *= if conjugate { f.conj() } else { f };
            }
        });
    }
}

pub fn apply_fresnel(field: &ComplexField, d: f64, direction: FresnelDirection) -> Result<ComplexField> {
    let phase = FresnelPhase::new(field.meta(), d)?;
    let mut values = field.values().to_vec();
    phase.multiply(&mut values, direction == FresnelDirection::Demodulate);
    let verb = match direction {
        FresnelDirection::Modulate => "modulate",
        FresnelDirection::Demodulate => "demodulate",
    };
    Ok(ComplexField::from_parts(
        field.meta().clone().with_note(format!("fresnel {verb} d={d:e}")),
        values,
    ))
}

/// Object-plane sample spacing `λR/(N p)` per axis for a Fourier hologram.
pub fn object_plane_pitch(meta: &FieldMetadata) -> (f64, f64) {
    let scale = meta.wavelength * meta.reference_distance / meta.pitch;
    (scale / meta.width as f64, scale / meta.height as f64)
}

/// Reconstructs the object plane of a Fourier hologram with one centered,
/// unitary forward transform.
///
/// The output keeps the hologram's metadata apart from the geometry flag
/// (now `in_plane`) and a note reporting the object-plane pitch. The image
/// is point-reflected through the grid center, as usual for a forward
/// transform reconstruction.
pub fn fourier_reconstruct(holo: &ComplexField) -> Result<ComplexField> {
    let meta = holo.meta();
    if meta.geometry != Geometry::Fourier {
        return Err(PropagationError::NotFourier);
    }
    let (w, h) = (meta.width, meta.height);
    let mut values = fft::ifftshift(holo.values(), w, h);
    fft::fft2(&mut values, w, h);
    let scale = 1.0 / ((w * h) as f64).sqrt();
    let mut values = fft::fftshift(&values, w, h);
    values.par_iter_mut().for_each(|v| *v *= scale);
    let (px, py) = object_plane_pitch(meta);
    let mut out_meta = meta.clone().with_note(format!("object plane pitch_x={px:e} pitch_y={py:e}"));
    out_meta.geometry = Geometry::InPlane;
    Ok(ComplexField::from_parts(out_meta, values))
}

/// Inverse of [`fourier_reconstruct`]: the Fourier hologram, referenced at
/// the object field's `reference_distance`, whose reconstruction is `object`.
pub fn fourier_hologram_of(object: &ComplexField) -> Result<ComplexField> {
    let meta = object.meta();
    let (w, h) = (meta.width, meta.height);
    let mut values = fft::ifftshift(object.values(), w, h);
    fft::ifft2(&mut values, w, h);
    let scale = ((w * h) as f64).sqrt();
    let mut values = fft::fftshift(&values, w, h);
    values.par_iter_mut().for_each(|v| *v *= scale);
    let mut out_meta = meta.clone().with_note("inverse object transform");
    out_meta.geometry = Geometry::Fourier;
    Ok(ComplexField::from_parts(out_meta, values))
}

/// Re-references a Fourier hologram from its reference distance R to
/// `R + delta_z` by multiplying with the lens phase
/// `exp(iπ(x²+y²)(1/R - 1/(R+dz))/λ)`.
fn rereference(holo: &ComplexField, delta_z: f64) -> Result<ComplexField> {
    let r = holo.meta().reference_distance;
    let target = r + delta_z;
    if !(target > 0.0) {
        return Err(PropagationError::BehindHologram { reference: r, delta_z });
    }
    let lens = apply_fresnel(holo, r * target / delta_z, FresnelDirection::Modulate)?;
    let (mut meta, values) = lens.into_parts();
    meta.reference_distance = target;
    Ok(ComplexField::from_parts(meta.with_note(format!("refocus dz={delta_z:e}")), values))
}

/// Object-plane reconstruction focused `delta_z` away from the scene center
/// (positive = deeper). `delta_z = 0` is exactly [`fourier_reconstruct`].
///
/// The output's `reference_distance` is the new focal plane, so its
/// object-plane pitch grows proportionally with depth.
pub fn refocus(holo: &ComplexField, delta_z: f64) -> Result<ComplexField> {
    check_distance(delta_z)?;
    if holo.meta().geometry != Geometry::Fourier {
        return Err(PropagationError::NotFourier);
    }
    if delta_z == 0.0 {
        return fourier_reconstruct(holo);
    }
    fourier_reconstruct(&rereference(holo, delta_z)?)
}

/// Moves the focus of an object field produced by [`refocus`] or
/// [`fourier_reconstruct`] by a further `delta_z`.
pub fn propagate_object_field(object: &ComplexField, delta_z: f64) -> Result<ComplexField> {
    check_distance(delta_z)?;
    if delta_z == 0.0 {
        return Ok(object.clone());
    }
    refocus(&fourier_hologram_of(object)?, delta_z)
}

/// Variance of the discrete Laplacian of `intensity` inside a square window
/// of half-size `radius` around `(row, col)`. Larger means sharper.
pub fn sharpness(intensity: &[f64], width: usize, height: usize, row: usize, col: usize, radius: usize) -> f64 {
    let r0 = row.saturating_sub(radius).max(1);
    let r1 = (row + radius).min(height.saturating_sub(2));
    let c0 = col.saturating_sub(radius).max(1);
    let c1 = (col + radius).min(width.saturating_sub(2));
    let mut samples = Vec::new();
    for r in r0..=r1 {
        for c in c0..=c1 {
            let at = |rr: usize, cc: usize| intensity[rr * width + cc];
            samples.push(at(r - 1, c) + at(r + 1, c) + at(r, c - 1) + at(r, c + 1) - 4.0 * at(r, c));
        }
    }
    if samples.is_empty() {
        return 0.0;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n
}
