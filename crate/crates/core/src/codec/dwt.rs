//! CDF 9/7 lifting transform with whole-sample symmetric extension and a
//! dyadic (Mallat) subband layout.

use super::{CodecError, Result};

const ALPHA: f64 = -1.586_134_342_059_924;
const BETA: f64 = -0.052_980_118_572_961;
const GAMMA: f64 = 0.882_911_075_530_934;
const DELTA: f64 = 0.443_506_852_043_971;
const K: f64 = 1.230_174_104_914_001;

/// One lifting step over interleaved samples: every sample of parity
/// `target` gets `coeff * (left + right)` of its opposite-parity neighbors,
/// mirrored at the edges.
fn lift(x: &mut [f64], target: usize, coeff: f64) {
    let n = x.len();
    let mut i = target;
    while i < n {
        let left = if i == 0 { x[1] } else { x[i - 1] };
        let right = if i + 1 < n { x[i + 1] } else { x[i - 1] };
        x[i] += coeff * (left + right);
        i += 2;
    }
}

fn forward_1d(x: &mut [f64], scratch: &mut Vec<f64>) {
    let n = x.len();
    if n < 2 {
        return;
    }
    lift(x, 1, ALPHA);
    lift(x, 0, BETA);
    lift(x, 1, GAMMA);
    lift(x, 0, DELTA);
    let low = n.div_ceil(2);
    scratch.clear();
    scratch.extend(x.iter().step_by(2).map(|v| v / K));
    scratch.extend(x.iter().skip(1).step_by(2).map(|v| v * K));
    x.copy_from_slice(&scratch[..n]);
    debug_assert_eq!(scratch.len() - low, n / 2);
}

fn inverse_1d(x: &mut [f64], scratch: &mut Vec<f64>) {
    let n = x.len();
    if n < 2 {
        return;
    }
    let low = n.div_ceil(2);
    scratch.clear();
    scratch.resize(n, 0.0);
    for (i, v) in x[..low].iter().enumerate() {
        scratch[2 * i] = v * K;
    }
    for (i, v) in x[low..].iter().enumerate() {
        scratch[2 * i + 1] = v / K;
    }
    x.copy_from_slice(scratch);
    lift(x, 0, -DELTA);
    lift(x, 1, -GAMMA);
    lift(x, 0, -BETA);
    lift(x, 1, -ALPHA);
}

/// Size of the low-pass region after each level, starting with the full size.
pub fn level_sizes(width: usize, height: usize, levels: usize) -> Vec<(usize, usize)> {
    let mut sizes = vec![(width, height)];
    for _ in 0..levels {
        let (w, h) = sizes[sizes.len() - 1];
        sizes.push((w.div_ceil(2), h.div_ceil(2)));
    }
    sizes
}

pub fn check_dims(width: usize, height: usize, levels: usize) -> Result<()> {
    if levels == 0 || levels > 16 {
        return Err(CodecError::InvalidLevels(levels));
    }
    let min = 1usize << levels;
    if width < min || height < min {
        return Err(CodecError::TooSmall { width, height, levels });
    }
    Ok(())
}

fn transform_rows(data: &mut [f64], stride: usize, w: usize, h: usize, forward: bool, scratch: &mut Vec<f64>) {
    for r in 0..h {
        let row = &mut data[r * stride..r * stride + w];
        if forward {
            forward_1d(row, scratch)
        } else {
            inverse_1d(row, scratch)
        }
    }
}

fn transform_cols(data: &mut [f64], stride: usize, w: usize, h: usize, forward: bool, scratch: &mut Vec<f64>) {
    let mut line = Vec::with_capacity(h);
    for c in 0..w {
        line.clear();
        line.extend((0..h).map(|r| data[r * stride + c]));
        if forward {
            forward_1d(&mut line, scratch)
        } else {
            inverse_1d(&mut line, scratch)
        }
        for (r, v) in line.iter().enumerate() {
            data[r * stride + c] = *v;
        }
    }
}

fn transform_region(data: &mut [f64], stride: usize, w: usize, h: usize, forward: bool) {
    let mut scratch = Vec::with_capacity(w.max(h));
    if forward {
        transform_rows(data, stride, w, h, true, &mut scratch);
        transform_cols(data, stride, w, h, true, &mut scratch);
    } else {
        transform_cols(data, stride, w, h, false, &mut scratch);
        transform_rows(data, stride, w, h, false, &mut scratch);
    }
}

/// Forward transform of a row-major `width × height` plane.
pub fn dwt97_forward(plane: &[f64], width: usize, height: usize, levels: usize) -> Result<Vec<f64>> {
    check_dims(width, height, levels)?;
    assert_eq!(plane.len(), width * height, "plane size mismatch");
    let mut data = plane.to_vec();
    for &(w, h) in &level_sizes(width, height, levels)[..levels] {
        transform_region(&mut data, width, w, h, true);
    }
    Ok(data)
}

pub fn dwt97_inverse(coeffs: &[f64], width: usize, height: usize, levels: usize) -> Result<Vec<f64>> {
    check_dims(width, height, levels)?;
    assert_eq!(coeffs.len(), width * height, "coefficient grid size mismatch");
    let mut data = coeffs.to_vec();
    for &(w, h) in level_sizes(width, height, levels)[..levels].iter().rev() {
        transform_region(&mut data, width, w, h, false);
    }
    Ok(data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Ll,
    /// Horizontal high-pass, vertical low-pass.
    Hl,
    Lh,
    Hh,
}

/// A rectangular coefficient region of the Mallat layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subband {
    /// 1 is the finest level.
    pub level: usize,
    pub orientation: Orientation,
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

/// Subbands coarse to fine: the final LL first, then HL/LH/HH per level.
pub fn subbands(width: usize, height: usize, levels: usize) -> Vec<Subband> {
    let sizes = level_sizes(width, height, levels);
    let (lw, lh) = sizes[levels];
    let mut out = vec![Subband {
        level: levels,
        orientation: Orientation::Ll,
        x0: 0,
        y0: 0,
        width: lw,
        height: lh,
    }];
    for level in (1..=levels).rev() {
        let (pw, ph) = sizes[level - 1];
        let (w, h) = sizes[level];
        out.push(Subband { level, orientation: Orientation::Hl, x0: w, y0: 0, width: pw - w, height: h });
        out.push(Subband { level, orientation: Orientation::Lh, x0: 0, y0: h, width: w, height: ph - h });
        out.push(Subband { level, orientation: Orientation::Hh, x0: w, y0: h, width: pw - w, height: ph - h });
    }
    out
}

/// L2 norm of the 1-D synthesis basis function of a level-`level` band
/// (`high` selects the detail band), measured on a long signal.
fn synthesis_norm_1d(level: usize, high: bool) -> f64 {
    let n = 64 << level;
    let mut coeffs = vec![0.0; n];
    let size = n >> level;
    let idx = if high { size + size / 2 } else { size / 2 };
    coeffs[idx] = 1.0;
    let mut scratch = Vec::new();
    let mut len = n >> (level - 1);
    while len <= n {
        inverse_1d(&mut coeffs[..len], &mut scratch);
        len <<= 1;
    }
    coeffs.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// L2 norm of a subband's 2-D synthesis basis function; a unit quantization
/// error in that band costs this much image-domain error.
pub fn synthesis_norm(level: usize, orientation: Orientation) -> f64 {
    let (hx, hy) = match orientation {
        Orientation::Ll => (false, false),
        Orientation::Hl => (true, false),
        Orientation::Lh => (false, true),
        Orientation::Hh => (true, true),
    };
    synthesis_norm_1d(level, hx) * synthesis_norm_1d(level, hy)
}
