//! Binary (P5) 8-bit PGM images.

use super::{FieldError, Result};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || width.checked_mul(height) != Some(pixels.len()) {
            return Err(FieldError::LengthMismatch {
                expected: width.saturating_mul(height),
                actual: pixels.len(),
            });
        }
        Ok(GrayImage { width, height, pixels })
    }
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Parses a P5 PGM with maxval ≤ 255. Header comments are allowed.
pub fn decode_pgm(data: &[u8]) -> Result<GrayImage> {
    let bad = |m: &str| FieldError::MalformedPgm(m.to_string());
    let mut pos = 0usize;

    let token = |pos: &mut usize| -> Result<String> {
        loop {
            while *pos < data.len() && data[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < data.len() && data[*pos] == b'#' {
                while *pos < data.len() && data[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < data.len() && !data[*pos].is_ascii_whitespace() && data[*pos] != b'#' {
            *pos += 1;
        }
        if start == *pos {
            return Err(bad("unexpected end of header"));
        }
        Ok(String::from_utf8_lossy(&data[start..*pos]).into_owned())
    };

    if token(&mut pos)? != "P5" {
        return Err(bad("missing P5 magic"));
    }
    let number = |pos: &mut usize, what: &str| -> Result<usize> {
        let t = token(pos)?;
        t.parse::<usize>().map_err(|_| FieldError::MalformedPgm(format!("bad {what} `{t}`")))
    };
    let width = number(&mut pos, "width")?;
    let height = number(&mut pos, "height")?;
    let maxval = number(&mut pos, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit PGM (maxval 1..=255) is supported"));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= data.len() || !data[pos].is_ascii_whitespace() {
        return Err(bad("missing raster separator"));
    }
    pos += 1;
    let n = width
        .checked_mul(height)
        .filter(|&n| n > 0)
        .ok_or_else(|| bad("invalid dimensions"))?;
    let raster = &data[pos..];
    if raster.len() != n {
        return Err(FieldError::MalformedPgm(format!(
            "raster has {} bytes, expected {n}",
            raster.len()
        )));
    }
    if let Some(v) = raster.iter().find(|&&v| v as usize > maxval) {
        return Err(FieldError::MalformedPgm(format!("sample {v} exceeds maxval {maxval}")));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: raster.to_vec(),
    })
}

pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(|source| FieldError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let data = fs::read(path).map_err(|source| FieldError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pgm(&data)
}
