//! Point-cloud Fourier hologram synthesis with wavefront recording planes.
//!
//! Points are grouped into depth slabs. Each slab's points are stamped onto
//! the slab's WRP with short precomputed kernels, then the accumulated field
//! is carried plane by plane towards the hologram with the angular spectrum
//! method. The last WRP field is finally propagated to the hologram plane and
//! demodulated into Fourier geometry.

mod cloud;
mod lut;
mod plan;
mod synth;

pub use cloud::{Point, PointCloud};
pub use lut::{build_lut, support_radius, PhaseMode, PsfKernel, PsfLut};
pub use plan::WrpPlan;
pub use synth::{object_pixel, synthesize, synthesize_hologram, to_fourier_hologram, SynthesisOptions};

use crate::field::FieldError;
use crate::propagation::PropagationError;

#[derive(Debug, thiserror::Error)]
pub enum CghError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("point {index}: {reason}")]
    InvalidPoint { index: usize, reason: &'static str },
    #[error("invalid WRP plan: {0}")]
    InvalidPlan(String),
    #[error("invalid PSF table: {0}")]
    InvalidLut(String),
    #[error("points outside the lateral aperture: {indices:?}")]
    OutsideAperture { indices: Vec<usize> },
    #[error("points outside the planned depth range: {indices:?}")]
    OutsideDepthRange { indices: Vec<usize> },
    #[error("PSF table covers |dz| <= {covered:e} but the plan needs {needed:e}")]
    LutTooShallow { covered: f64, needed: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

pub type Result<T, E = CghError> = std::result::Result<T, E>;
