//! Built-in wavelet plane coder: 9/7 transform, deadzone quantization,
//! bitplane coding with an adaptive binary range coder, and step-size
//! bisection to hit a target rate.

use super::dwt::{check_dims, dwt97_forward, dwt97_inverse, subbands, synthesis_norm, Subband};
use super::range::{Decoder, Encoder, Prob};
use super::{CodecError, Result};
use crate::field::GrayImage;

const MAGIC: &[u8; 4] = b"HQW1";
pub const DEFAULT_LEVELS: usize = 4;
/// Largest plane the decoder will allocate (16384 × 2048).
pub const MAX_PIXELS: usize = 1 << 25;
const MAX_BITPLANES: u8 = 30;
const MIN_STEP: f64 = 1e-2;
const MAX_STEP: f64 = 1e4;

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub width: usize,
    pub height: usize,
    pub levels: usize,
    pub step: f64,
    pub bitplanes: Vec<u8>,
}

impl Header {
    fn encoded_len(levels: usize) -> usize {
        4 + 4 + 4 + 1 + 8 + 3 * levels + 1
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.push(self.levels as u8);
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.bitplanes);
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| CodecError::Bitstream(m.to_string());
        if bytes.len() < 13 || &bytes[..4] != MAGIC {
            return Err(bad("missing wavelet bitstream magic"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
        let (width, height, levels) = (u32_at(4), u32_at(8), bytes[12] as usize);
        if width == 0 || height == 0 || width.saturating_mul(height) > MAX_PIXELS {
            return Err(bad("implausible plane dimensions"));
        }
        check_dims(width, height, levels).map_err(|e| bad(&e.to_string()))?;
        let len = Self::encoded_len(levels);
        if bytes.len() < len {
            return Err(bad("truncated header"));
        }
        let step = f64::from_le_bytes(bytes[13..21].try_into().expect("8 bytes"));
        if !(step.is_finite() && step > 0.0) {
            return Err(bad("invalid quantizer step"));
        }
        let bitplanes = bytes[21..len].to_vec();
        if bitplanes.iter().any(|&b| b > MAX_BITPLANES) {
            return Err(bad("too many bitplanes"));
        }
        Ok(Header { width, height, levels, step, bitplanes })
    }
}

/// Transform of one plane, reusable across quantizer steps.
pub struct Analysis {
    width: usize,
    height: usize,
    levels: usize,
    coeffs: Vec<f64>,
    bands: Vec<Subband>,
    norms: Vec<f64>,
}

/// Decomposition depth used for a plane: the default, reduced for small planes.
pub fn levels_for(width: usize, height: usize) -> Result<usize> {
    let min = width.min(height);
    if min < 2 {
        return Err(CodecError::TooSmall { width, height, levels: 1 });
    }
    Ok(DEFAULT_LEVELS.min(min.ilog2() as usize))
}

impl Analysis {
    pub fn new(plane: &GrayImage) -> Result<Self> {
        let (w, h) = (plane.width, plane.height);
        let levels = levels_for(w, h)?;
        let shifted: Vec<f64> = plane.pixels.iter().map(|&p| p as f64 - 128.0).collect();
        let coeffs = dwt97_forward(&shifted, w, h, levels)?;
        let bands = subbands(w, h, levels);
        let norms = bands.iter().map(|b| synthesis_norm(b.level, b.orientation)).collect();
        Ok(Analysis { width: w, height: h, levels, coeffs, bands, norms })
    }

    fn quantize(&self, step: f64) -> (Vec<i64>, Vec<u8>) {
        let mut q = vec![0i64; self.coeffs.len()];
        let mut bitplanes = Vec::with_capacity(self.bands.len());
        for (band, norm) in self.bands.iter().zip(&self.norms) {
            let band_step = step / norm;
            let mut max = 0u64;
            for_each_index(band, self.width, |i| {
                let c = self.coeffs[i];
                let m = (c.abs() / band_step).floor() as i64;
                q[i] = if c < 0.0 { -m } else { m };
                max = max.max(m.unsigned_abs());
            });
            bitplanes.push((64 - max.leading_zeros()) as u8);
        }
        (q, bitplanes)
    }

    /// Encodes with a fixed base quantizer step.
    pub fn encode(&self, step: f64) -> Result<Vec<u8>> {
        let (q, bitplanes) = self.quantize(step);
        if bitplanes.iter().any(|&b| b > MAX_BITPLANES) {
            return Err(CodecError::StepTooSmall(step));
        }
        let header = Header { width: self.width, height: self.height, levels: self.levels, step, bitplanes };
        let mut out = Vec::new();
        header.write(&mut out);
        let mut enc = Encoder::new();
        code_bands(&self.bands, self.width, &header.bitplanes, |ctx, kind, i, plane| match kind {
            Kind::Significance | Kind::Refinement => {
                let bit = (q[i].unsigned_abs() >> plane) & 1 == 1;
                enc.encode(ctx, bit);
                bit
            }
            Kind::Sign => {
                let neg = q[i] < 0;
                enc.encode_direct(neg);
                neg
            }
        });
        out.extend_from_slice(&enc.finish());
        Ok(out)
    }
}

fn for_each_index(band: &Subband, stride: usize, mut f: impl FnMut(usize)) {
    for r in band.y0..band.y0 + band.height {
        for c in band.x0..band.x0 + band.width {
            f(r * stride + c);
        }
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Significance,
    Sign,
    Refinement,
}

/// Shared traversal for encoder and decoder. `code` receives the context, the
/// symbol kind, the coefficient index and the bitplane, and returns the bit.
fn code_bands(
    bands: &[Subband],
    stride: usize,
    bitplanes: &[u8],
    mut code: impl FnMut(&mut Prob, Kind, usize, u32) -> bool,
) {
    let mut significant = vec![false; stride * bands.iter().map(|b| b.y0 + b.height).max().unwrap_or(0)];
    let mut unused = Prob::default();
    for (band, &planes) in bands.iter().zip(bitplanes) {
        // one adaptive model per (subband, bitplane, significance | refinement)
        let mut ctx = vec![[Prob::default(); 2]; planes as usize];
        for plane in (0..planes as u32).rev() {
            let pctx = &mut ctx[plane as usize];
            for r in band.y0..band.y0 + band.height {
                for c in band.x0..band.x0 + band.width {
                    let i = r * stride + c;
                    if significant[i] {
                        code(&mut pctx[1], Kind::Refinement, i, plane);
                        continue;
                    }
                    if code(&mut pctx[0], Kind::Significance, i, plane) {
                        significant[i] = true;
                        code(&mut unused, Kind::Sign, i, plane);
                    }
                }
            }
        }
    }
}

/// Parses a bitstream back to its header and quantization indices.
pub fn decode_indices(bytes: &[u8]) -> Result<(Header, Vec<i64>)> {
    let header = Header::parse(bytes)?;
    let bands = subbands(header.width, header.height, header.levels);
    if header.bitplanes.len() != bands.len() {
        return Err(CodecError::Bitstream("subband count mismatch".into()));
    }
    let payload = &bytes[Header::encoded_len(header.levels)..];
    let mut dec = Decoder::new(payload);
    let mut mags = vec![0u64; header.width * header.height];
    let mut neg = vec![false; header.width * header.height];
    code_bands(&bands, header.width, &header.bitplanes, |ctx, kind, i, plane| match kind {
        Kind::Significance | Kind::Refinement => {
            let bit = dec.decode(ctx);
            if bit {
                mags[i] |= 1 << plane;
            }
            bit
        }
        Kind::Sign => {
            let bit = dec.decode_direct();
            neg[i] = bit;
            bit
        }
    });
    if dec.overrun() {
        return Err(CodecError::Bitstream("payload is truncated".into()));
    }
    let q = mags
        .iter()
        .zip(&neg)
        .map(|(&m, &n)| if n { -(m as i64) } else { m as i64 })
        .collect();
    Ok((header, q))
}

pub fn decode_plane(bytes: &[u8]) -> Result<GrayImage> {
    let (header, q) = decode_indices(bytes)?;
    let (w, h) = (header.width, header.height);
    let mut coeffs = vec![0.0; w * h];
    for band in subbands(w, h, header.levels) {
        let band_step = header.step / synthesis_norm(band.level, band.orientation);
        for_each_index(&band, w, |i| {
            let v = q[i];
            if v != 0 {
                coeffs[i] = v.signum() as f64 * (v.unsigned_abs() as f64 + 0.5) * band_step;
            }
        });
    }
    let samples = dwt97_inverse(&coeffs, w, h, header.levels)?;
    let pixels = samples.iter().map(|v| (v + 128.0).round().clamp(0.0, 255.0) as u8).collect();
    Ok(GrayImage { width: w, height: h, pixels })
}

/// Allowed relative deviation from the target rate.
pub fn rate_tolerance(target_bpp: f64) -> f64 {
    if target_bpp < 0.3 { 0.10 } else { 0.05 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPlane {
    pub bytes: Vec<u8>,
    pub step: f64,
    pub achieved_bpp: f64,
    /// False when no step size reaches the target within tolerance; the
    /// closest achievable stream is returned instead.
    pub target_reached: bool,
}

fn bpp(bytes: usize, pixels: usize) -> f64 {
    bytes as f64 * 8.0 / pixels as f64
}

/// Encodes a plane at `target_bpp`, bisecting the quantizer step in log space.
pub fn encode_plane(plane: &GrayImage, target_bpp: f64) -> Result<EncodedPlane> {
    if !(target_bpp.is_finite() && target_bpp > 0.0) {
        return Err(CodecError::InvalidRate(target_bpp));
    }
    let analysis = Analysis::new(plane)?;
    let pixels = plane.width * plane.height;
    let tol = rate_tolerance(target_bpp);
    let try_step = |step: f64| -> Result<EncodedPlane> {
        let bytes = analysis.encode(step)?;
        let achieved_bpp = bpp(bytes.len(), pixels);
        let target_reached = ((achieved_bpp - target_bpp) / target_bpp).abs() <= tol;
        Ok(EncodedPlane { bytes, step, achieved_bpp, target_reached })
    };
    let closer = |a: EncodedPlane, b: EncodedPlane| {
        if (a.achieved_bpp - target_bpp).abs() <= (b.achieved_bpp - target_bpp).abs() { a } else { b }
    };

    let (mut lo, mut hi) = (MIN_STEP.ln(), MAX_STEP.ln());
    let finest = try_step(MIN_STEP)?;
    if finest.target_reached || finest.achieved_bpp < target_bpp {
        return Ok(finest);
    }
    let coarsest = try_step(MAX_STEP)?;
    if coarsest.target_reached || coarsest.achieved_bpp > target_bpp {
        return Ok(closer(coarsest, finest));
    }
    let mut best = closer(finest, coarsest);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let candidate = try_step(mid.exp())?;
        if candidate.achieved_bpp > target_bpp {
            lo = mid;
        } else {
            hi = mid;
        }
        if candidate.target_reached {
            return Ok(candidate);
        }
        best = closer(best, candidate);
        if hi - lo < 1e-9 {
            break;
        }
    }
    Ok(best)
}
