//! Distortion ladder: a built-in wavelet plane coder with rate control,
//! adapters for external command-line codecs, and the ladder driver that
//! compresses both quantized planes of a hologram at several rates.

mod dwt;
mod external;
mod ladder;
mod range;
mod wavelet;

pub use dwt::{dwt97_forward, dwt97_inverse, subbands, synthesis_norm, Orientation, Subband};
pub use external::{select_qp, ExternalCodec, QpRange, RateControl};
pub use ladder::{build_ladder, read_manifest, write_manifest, Ladder, LadderRow, MANIFEST_FILE};
pub use wavelet::{
    decode_indices, decode_plane, encode_plane, levels_for, rate_tolerance, Analysis, EncodedPlane,
    Header, DEFAULT_LEVELS, MAX_PIXELS,
};

use crate::field::{FieldError, GrayImage};
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("decomposition depth must be between 1 and 16, got {0}")]
    InvalidLevels(usize),
    #[error("{width}x{height} plane is too small for {levels} decomposition levels")]
    TooSmall { width: usize, height: usize, levels: usize },
    #[error("target rate must be a positive number of bits per pixel, got {0}")]
    InvalidRate(f64),
    #[error("quantizer step {0} is too fine for the coefficient range")]
    StepTooSmall(f64),
    #[error("malformed bitstream: {0}")]
    Bitstream(String),
    #[error("external codec unavailable: `{program}` not found")]
    Unavailable { program: String },
    #[error("external codec `{program}` failed ({status}): {stderr}")]
    CommandFailed { program: String, status: String, stderr: String },
    #[error("external codec produced unusable output: {0}")]
    BadOutput(String),
    #[error("invalid codec configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(#[from] csv::Error),
}

pub type Result<T, E = CodecError> = std::result::Result<T, E>;

pub const BUILTIN_ID: &str = "builtin_wavelet";

/// A codec the ladder can run.
#[derive(Debug, Clone)]
pub enum Codec {
    Wavelet,
    External(ExternalCodec),
}

/// Outcome of compressing one 8-bit plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneResult {
    pub decoded: GrayImage,
    pub bitstream_bytes: usize,
    pub achieved_bpp: f64,
    pub target_reached: bool,
    pub psnr_db: f64,
}

impl Codec {
    pub fn id(&self) -> &str {
        match self {
            Codec::Wavelet => BUILTIN_ID,
            Codec::External(ext) => &ext.name,
        }
    }

    pub fn compress_plane(&self, plane: &GrayImage, target_bpp: f64) -> Result<PlaneResult> {
        let (decoded, bitstream_bytes, target_reached) = match self {
            Codec::Wavelet => {
                let enc = encode_plane(plane, target_bpp)?;
                (decode_plane(&enc.bytes)?, enc.bytes.len(), enc.target_reached)
            }
            Codec::External(ext) => {
                let out = ext.compress(plane, target_bpp)?;
                (out.decoded, out.bitstream_bytes, out.target_reached)
            }
        };
        if (decoded.width, decoded.height) != (plane.width, plane.height) {
            return Err(CodecError::BadOutput(format!(
                "decoded plane is {}x{}, expected {}x{}",
                decoded.width, decoded.height, plane.width, plane.height
            )));
        }
        let pixels = plane.width * plane.height;
        Ok(PlaneResult {
            psnr_db: psnr(&plane.pixels, &decoded.pixels),
            achieved_bpp: bitstream_bytes as f64 * 8.0 / pixels as f64,
            decoded,
            bitstream_bytes,
            target_reached,
        })
    }
}

/// Peak signal-to-noise ratio of 8-bit samples; infinite when identical.
pub fn psnr(reference: &[u8], test: &[u8]) -> f64 {
    assert_eq!(reference.len(), test.len(), "psnr needs equal-length planes");
    let sse: f64 = reference
        .iter()
        .zip(test)
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    if sse == 0.0 {
        return f64::INFINITY;
    }
    let mse = sse / reference.len() as f64;
    10.0 * (255.0f64 * 255.0 / mse).log10()
}
