//! Complex wave-field container shared by every stage of the pipeline.
//!
//! A [`ComplexField`] is a row-major grid of complex amplitudes together with
//! the physical sampling parameters needed to propagate or reconstruct it.
//! Fields are immutable once built: operations return new fields.

mod container;
mod pgm;
mod quantize;

pub use container::{decode_field, encode_field, read_field, sidecar_path, write_field};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm, GrayImage};
pub use quantize::{
    decode_quantized_sidecar, dequantize8, quantize8, read_quantized, write_quantized,
    QuantizedField, QuantizedPlane,
};

use num_complex::Complex64;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),
    #[error("value grid has {actual} samples, metadata requires {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("malformed sidecar at line {line}: {reason}")]
    MalformedSidecar { line: usize, reason: String },
    #[error("sidecar is missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("unsupported container version `{0}`")]
    UnsupportedVersion(String),
    #[error("payload size mismatch: expected {expected} bytes, found {actual}")]
    PayloadSizeMismatch { expected: u64, actual: u64 },
    #[error("malformed PGM: {0}")]
    MalformedPgm(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = FieldError> = std::result::Result<T, E>;

/// Recording geometry of a hologram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    /// Spherical reference focused in the scene center plane; the object
    /// field is recovered with a single Fourier transform.
    Fourier,
    /// Plain sampled wavefield (e.g. a wavefront recording plane).
    InPlane,
}

impl Geometry {
    pub fn as_str(self) -> &'static str {
        match self {
            Geometry::Fourier => "fourier",
            Geometry::InPlane => "in_plane",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fourier" => Some(Geometry::Fourier),
            "in_plane" => Some(Geometry::InPlane),
            _ => None,
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Physical sampling description of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMetadata {
    pub width: usize,
    pub height: usize,
    /// Pixel pitch in meters.
    pub pitch: f64,
    /// Wavelength in meters.
    pub wavelength: f64,
    /// Axial distance of the reference focus / scene center, meters.
    pub reference_distance: f64,
    pub geometry: Geometry,
    pub name: String,
    /// Free-form provenance notes appended by processing steps.
    pub notes: Vec<String>,
}

impl FieldMetadata {
    pub fn new(
        width: usize,
        height: usize,
        pitch: f64,
        wavelength: f64,
        reference_distance: f64,
        geometry: Geometry,
        name: impl Into<String>,
    ) -> Result<Self> {
        let meta = FieldMetadata {
            width,
            height,
            pitch,
            wavelength,
            reference_distance,
            geometry,
            name: name.into(),
            notes: Vec::new(),
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FieldError::InvalidMetadata(m.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("width and height must be at least 1");
        }
        if self.width.checked_mul(self.height).is_none() {
            return bad("width * height overflows");
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return bad("pitch must be positive and finite");
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return bad("wavelength must be positive and finite");
        }
        if !(self.reference_distance.is_finite() && self.reference_distance > 0.0) {
            return bad("reference distance must be positive and finite");
        }
        if self.name.contains(['\n', '\r']) || self.notes.iter().any(|n| n.contains(['\n', '\r'])) {
            return bad("name and notes must be single-line");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copy with a different grid size, all physical parameters kept.
    pub fn resized(&self, width: usize, height: usize) -> Self {
        FieldMetadata {
            width,
            height,
            ..self.clone()
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        let note: String = note.into();
        self.notes.push(note.replace(['\n', '\r'], " "));
        self
    }
}

/// Row-major grid of complex amplitudes with its sampling metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    meta: FieldMetadata,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(meta: FieldMetadata, values: Vec<Complex64>) -> Result<Self> {
        meta.validate()?;
        if values.len() != meta.len() {
            return Err(FieldError::LengthMismatch {
                expected: meta.len(),
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(FieldError::NonFinite { index });
        }
        Ok(ComplexField { meta, values })
    }

    pub fn zeros(meta: FieldMetadata) -> Result<Self> {
        meta.validate()?;
        let values = vec![Complex64::new(0.0, 0.0); meta.len()];
        Ok(ComplexField { meta, values })
    }

    /// Builds a field from a sample function evaluated at `(row, col)`.
    pub fn from_fn(meta: FieldMetadata, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut values = Vec::with_capacity(meta.len());
        for row in 0..meta.height {
            for col in 0..meta.width {
                values.push(f(row, col));
            }
        }
        Self::new(meta, values)
    }

    /// Crate-internal constructor for results of numerically safe operations.
    /// Debug builds still check the invariants.
    pub(crate) fn from_parts(meta: FieldMetadata, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), meta.len());
        debug_assert!(values.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
        ComplexField { meta, values }
    }

    pub fn meta(&self) -> &FieldMetadata {
        &self.meta
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn width(&self) -> usize {
        self.meta.width
    }

    pub fn height(&self) -> usize {
        self.meta.height
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.meta.width + col]
    }

    pub fn into_parts(self) -> (FieldMetadata, Vec<Complex64>) {
        (self.meta, self.values)
    }

    pub fn with_meta(self, meta: FieldMetadata) -> Result<Self> {
        Self::new(meta, self.values)
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// `||self - other|| / ||other||`; grids must have equal size.
    pub fn relative_l2(&self, other: &ComplexField) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "grid size mismatch");
        let diff: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let reference = other.energy();
        if reference == 0.0 {
            diff.sqrt()
        } else {
            (diff / reference).sqrt()
        }
    }
}
