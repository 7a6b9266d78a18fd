//! 8-bit quantization of the real and imaginary planes.
//!
//! Each plane is mapped affinely from its own `[min, max]` onto levels
//! `0..=255`, rounding half away from zero. The ranges are kept so the planes
//! can be mapped back after an external codec has processed them.

use super::container::{write_metadata, KeyValues, VERSION};
use super::pgm::{read_pgm, write_pgm, GrayImage};
use super::{ComplexField, FieldError, FieldMetadata, Result};
use num_complex::Complex64;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

const QUANT_TAG: &str = "holoqa-quantized";

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPlane {
    pub levels: Vec<u8>,
    pub min: f64,
    pub max: f64,
}

impl QuantizedPlane {
    fn quantize(samples: impl Iterator<Item = f64> + Clone) -> Self {
        let (min, max) = samples
            .clone()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let span = max - min;
        let levels = if span > 0.0 {
            samples
                .map(|v| ((v - min) / span * 255.0).round().clamp(0.0, 255.0) as u8)
                .collect()
        } else {
            samples.map(|_| 0).collect()
        };
        QuantizedPlane { levels, min, max }
    }

    pub fn level_value(&self, level: u8) -> f64 {
        if self.max == self.min {
            self.min
        } else {
            self.min + (level as f64 / 255.0) * (self.max - self.min)
        }
    }

    /// Half a quantization step, the worst-case round-trip error.
    pub fn half_step(&self) -> f64 {
        (self.max - self.min) / (2.0 * 255.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedField {
    pub meta: FieldMetadata,
    pub real: QuantizedPlane,
    pub imag: QuantizedPlane,
}

impl QuantizedField {
    pub fn validate(&self) -> Result<()> {
        self.meta.validate()?;
        for plane in [&self.real, &self.imag] {
            if plane.levels.len() != self.meta.len() {
                return Err(FieldError::LengthMismatch {
                    expected: self.meta.len(),
                    actual: plane.levels.len(),
                });
            }
            if !(plane.min.is_finite() && plane.max.is_finite() && plane.min <= plane.max) {
                return Err(FieldError::InvalidMetadata(format!(
                    "invalid plane range ({}, {})",
                    plane.min, plane.max
                )));
            }
        }
        Ok(())
    }

    /// Same ranges and metadata, different level planes (e.g. codec output).
    pub fn with_levels(&self, real: Vec<u8>, imag: Vec<u8>) -> Result<Self> {
        let q = QuantizedField {
            meta: self.meta.clone(),
            real: QuantizedPlane { levels: real, ..self.real.clone() },
            imag: QuantizedPlane { levels: imag, ..self.imag.clone() },
        };
        q.validate()?;
        Ok(q)
    }
}

pub fn quantize8(field: &ComplexField) -> Result<QuantizedField> {
    let values = field.values();
    if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(FieldError::NonFinite { index });
    }
    Ok(QuantizedField {
        meta: field.meta().clone(),
        real: QuantizedPlane::quantize(values.iter().map(|v| v.re)),
        imag: QuantizedPlane::quantize(values.iter().map(|v| v.im)),
    })
}

pub fn dequantize8(q: &QuantizedField) -> Result<ComplexField> {
    q.validate()?;
    let values = q
        .real
        .levels
        .iter()
        .zip(&q.imag.levels)
        .map(|(&re, &im)| Complex64::new(q.real.level_value(re), q.imag.level_value(im)))
        .collect();
    ComplexField::new(q.meta.clone(), values)
}

fn plane_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("{stem}_re.pgm")),
        dir.join(format!("{stem}_im.pgm")),
        dir.join(format!("{stem}.qmeta")),
    )
}

fn quantized_sidecar(q: &QuantizedField) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format = {QUANT_TAG}");
    let _ = writeln!(out, "version = {VERSION}");
    write_metadata(&mut out, &q.meta);
    let _ = writeln!(out, "real_min = {:e}", q.real.min);
    let _ = writeln!(out, "real_max = {:e}", q.real.max);
    let _ = writeln!(out, "imag_min = {:e}", q.imag.min);
    let _ = writeln!(out, "imag_max = {:e}", q.imag.max);
    out
}

/// Writes `<stem>_re.pgm`, `<stem>_im.pgm` and the `<stem>.qmeta` ranges file.
pub fn write_quantized(q: &QuantizedField, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    q.validate()?;
    let (re_path, im_path, meta_path) = plane_paths(dir, stem);
    fs::create_dir_all(dir).map_err(|source| FieldError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (plane, path) in [(&q.real, &re_path), (&q.imag, &im_path)] {
        let img = GrayImage::new(q.meta.width, q.meta.height, plane.levels.clone())?;
        write_pgm(&img, path)?;
    }
    fs::write(&meta_path, quantized_sidecar(q)).map_err(|source| FieldError::Io {
        path: meta_path.clone(),
        source,
    })?;
    Ok(vec![re_path, im_path, meta_path])
}

/// Parses a `.qmeta` sidecar into metadata plus `(real, imag)` ranges.
pub fn decode_quantized_sidecar(text: &str) -> Result<(FieldMetadata, (f64, f64), (f64, f64))> {
    let kv = KeyValues::parse(text)?;
    kv.check_format(QUANT_TAG)?;
    let meta = kv.metadata()?;
    let real = (kv.number("real_min")?, kv.number("real_max")?);
    let imag = (kv.number("imag_min")?, kv.number("imag_max")?);
    Ok((meta, real, imag))
}

pub fn read_quantized(dir: &Path, stem: &str) -> Result<QuantizedField> {
    let (re_path, im_path, meta_path) = plane_paths(dir, stem);
    let text = fs::read_to_string(&meta_path).map_err(|source| FieldError::Io {
        path: meta_path.clone(),
        source,
    })?;
    let (meta, (real_min, real_max), (imag_min, imag_max)) = decode_quantized_sidecar(&text)?;
    let mut planes = Vec::with_capacity(2);
    for path in [&re_path, &im_path] {
        let img = read_pgm(path)?;
        if img.width != meta.width || img.height != meta.height {
            return Err(FieldError::LengthMismatch {
                expected: meta.len(),
                actual: img.pixels.len(),
            });
        }
        planes.push(img.pixels);
    }
    let imag_levels = planes.pop().unwrap_or_default();
    let real_levels = planes.pop().unwrap_or_default();
    let q = QuantizedField {
        meta,
        real: QuantizedPlane { levels: real_levels, min: real_min, max: real_max },
        imag: QuantizedPlane { levels: imag_levels, min: imag_min, max: imag_max },
    };
    q.validate()?;
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Geometry;
    use proptest::prelude::*;

    fn field_from(re: &[f64], im: &[f64]) -> ComplexField {
        let meta = FieldMetadata::new(re.len(), 1, 1e-6, 5e-7, 1.0, Geometry::Fourier, "t").unwrap();
        let values = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        ComplexField::new(meta, values).unwrap()
    }

    #[test]
    fn endpoints_map_to_extreme_levels() {
        let q = quantize8(&field_from(&[-2.0, 3.0], &[1.0, -1.0])).unwrap();
        assert_eq!(q.real.levels, vec![0, 255]);
        assert_eq!(q.imag.levels, vec![255, 0]);
    }

    #[test]
    fn half_level_rounds_away_from_zero() {
        // 0.5 maps to 127.5
        let q = quantize8(&field_from(&[0.0, 0.5, 1.0], &[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(q.real.levels, vec![0, 128, 255]);
    }

    #[test]
    fn constant_plane() {
        let q = quantize8(&field_from(&[0.25; 4], &[0.0; 4])).unwrap();
        assert_eq!(q.real.levels, vec![0; 4]);
        assert_eq!((q.real.min, q.real.max), (0.25, 0.25));
        let back = dequantize8(&q).unwrap();
        assert!(back.values().iter().all(|v| v.re == 0.25 && v.im == 0.0));
    }

    #[test]
    fn dequantize_endpoints() {
        let q = QuantizedField {
            meta: FieldMetadata::new(2, 1, 1e-6, 5e-7, 1.0, Geometry::Fourier, "t").unwrap(),
            real: QuantizedPlane { levels: vec![0, 255], min: -1.0, max: 1.0 },
            imag: QuantizedPlane { levels: vec![0, 0], min: 0.0, max: 0.0 },
        };
        let f = dequantize8(&q).unwrap();
        assert_eq!(f.values()[0].re, -1.0);
        assert_eq!(f.values()[1].re, 1.0);
    }

    #[test]
    fn rejects_non_finite_without_clamping() {
        // ComplexField::new already rejects NaN; quantize8 guards fields built crate-internally.
        let meta = FieldMetadata::new(1, 1, 1e-6, 5e-7, 1.0, Geometry::Fourier, "t").unwrap();
        let f = ComplexField { meta, values: vec![Complex64::new(f64::NAN, 0.0)] };
        assert!(matches!(quantize8(&f), Err(FieldError::NonFinite { index: 0 })));
    }

    #[test]
    fn round_trip_error_bound_on_random_64x64() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let meta = FieldMetadata::new(64, 64, 1e-6, 5e-7, 1.0, Geometry::Fourier, "r").unwrap();
            let scale = rng.random_range(1e-3..1e3);
            let f = ComplexField::from_fn(meta, |_, _| {
                Complex64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
            })
            .unwrap();
            let q = quantize8(&f).unwrap();
            let back = dequantize8(&q).unwrap();
            let (tol_re, tol_im) = (q.real.half_step() * (1.0 + 1e-9), q.imag.half_step() * (1.0 + 1e-9));
            for (a, b) in f.values().iter().zip(back.values()) {
                assert!((a.re - b.re).abs() <= tol_re);
                assert!((a.im - b.im).abs() <= tol_im);
            }
        }
    }

    #[test]
    fn pgm_export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let q = quantize8(&field_from(&[0.0, 0.3, 1.0, -0.5], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let written = write_quantized(&q, dir.path(), "holo").unwrap();
        assert_eq!(written.len(), 3);
        assert_eq!(read_quantized(dir.path(), "holo").unwrap(), q);
    }

    proptest! {
        #[test]
        fn quantization_is_monotone_and_bounded(samples in prop::collection::vec(-1e6f64..1e6, 2..200)) {
            let zeros = vec![0.0; samples.len()];
            let q = quantize8(&field_from(&samples, &zeros)).unwrap();
            for i in 0..samples.len() {
                for j in 0..samples.len() {
                    if samples[i] <= samples[j] {
                        prop_assert!(q.real.levels[i] <= q.real.levels[j]);
                    }
                }
                let err = (q.real.level_value(q.real.levels[i]) - samples[i]).abs();
                prop_assert!(err <= q.real.half_step() * (1.0 + 1e-9) + 1e-9);
            }
        }
    }
}
