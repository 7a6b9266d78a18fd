//! On-disk hologram container.
//!
//! A field is stored as two files: the payload (real plane then imaginary
//! plane, row-major, little-endian `f32`) and a UTF-8 `key = value` sidecar
//! next to it at `<payload>.meta`.

use super::{ComplexField, FieldError, FieldMetadata, Geometry, Result};
use num_complex::Complex64;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub(crate) const FORMAT_TAG: &str = "holoqa-field";
pub(crate) const VERSION: &str = "1";

pub fn sidecar_path(payload: &Path) -> PathBuf {
    let mut name = payload.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// Parsed `key = value` lines with their 1-based line numbers.
pub(crate) struct KeyValues {
    entries: Vec<(usize, String, String)>,
}

impl KeyValues {
    pub(crate) fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(FieldError::MalformedSidecar {
                    line: i + 1,
                    reason: "expected `key = value`".into(),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(FieldError::MalformedSidecar {
                    line: i + 1,
                    reason: "empty key".into(),
                });
            }
            entries.push((i + 1, key.to_string(), value.trim().to_string()));
        }
        Ok(KeyValues { entries })
    }

    fn find(&self, key: &str) -> Option<&(usize, String, String)> {
        self.entries.iter().find(|(_, k, _)| k == key)
    }

    pub(crate) fn text(&self, key: &'static str) -> Result<&str> {
        self.find(key).map(|(_, _, v)| v.as_str()).ok_or(FieldError::MissingKey(key))
    }

    pub(crate) fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries.iter().filter(move |(_, k, _)| k == key).map(|(_, _, v)| v.as_str())
    }

    pub(crate) fn number<T: std::str::FromStr>(&self, key: &'static str) -> Result<T> {
        let (line, _, value) = self.find(key).ok_or(FieldError::MissingKey(key))?;
        value.parse().map_err(|_| FieldError::MalformedSidecar {
            line: *line,
            reason: format!("`{key}` is not a valid number: `{value}`"),
        })
    }

    pub(crate) fn check_format(&self, tag: &str) -> Result<()> {
        let format = self.text("format")?;
        if format != tag {
            let line = self.find("format").map(|e| e.0).unwrap_or(0);
            return Err(FieldError::MalformedSidecar {
                line,
                reason: format!("unknown format tag `{format}`"),
            });
        }
        let version = self.text("version")?;
        if version != VERSION {
            return Err(FieldError::UnsupportedVersion(version.to_string()));
        }
        Ok(())
    }

    pub(crate) fn metadata(&self) -> Result<FieldMetadata> {
        let geometry_text = self.text("geometry")?;
        let geometry = Geometry::parse(geometry_text).ok_or_else(|| FieldError::MalformedSidecar {
            line: self.find("geometry").map(|e| e.0).unwrap_or(0),
            reason: format!("unknown geometry `{geometry_text}`"),
        })?;
        let meta = FieldMetadata {
            width: self.number("width")?,
            height: self.number("height")?,
            pitch: self.number("pitch_m")?,
            wavelength: self.number("wavelength_m")?,
            reference_distance: self.number("reference_distance_m")?,
            geometry,
            name: self.find("name").map(|e| e.2.clone()).unwrap_or_default(),
            notes: self.all("note").map(str::to_string).collect(),
        };
        meta.validate()?;
        Ok(meta)
    }
}

pub(crate) fn write_metadata(out: &mut String, meta: &FieldMetadata) {
    // `{}` on f64 prints the shortest string that parses back to the same value.
    let _ = writeln!(out, "width = {}", meta.width);
    let _ = writeln!(out, "height = {}", meta.height);
    let _ = writeln!(out, "pitch_m = {:e}", meta.pitch);
    let _ = writeln!(out, "wavelength_m = {:e}", meta.wavelength);
    let _ = writeln!(out, "reference_distance_m = {}", meta.reference_distance);
    let _ = writeln!(out, "geometry = {}", meta.geometry);
    let _ = writeln!(out, "name = {}", meta.name);
    for note in &meta.notes {
        let _ = writeln!(out, "note = {note}");
    }
}

/// Serializes a field into `(sidecar text, payload bytes)`.
pub fn encode_field(field: &ComplexField) -> (String, Vec<u8>) {
    let mut sidecar = String::new();
    let _ = writeln!(sidecar, "format = {FORMAT_TAG}");
    let _ = writeln!(sidecar, "version = {VERSION}");
    write_metadata(&mut sidecar, field.meta());

    let values = field.values();
    let mut payload = Vec::with_capacity(values.len() * 8);
    for v in values {
        payload.extend_from_slice(&(v.re as f32).to_le_bytes());
    }
    for v in values {
        payload.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    (sidecar, payload)
}

/// Parses a field from its sidecar text and payload bytes.
pub fn decode_field(sidecar: &str, payload: &[u8]) -> Result<ComplexField> {
    let kv = KeyValues::parse(sidecar)?;
    kv.check_format(FORMAT_TAG)?;
    let meta = kv.metadata()?;
    let n = meta.len();
    let expected = (n as u64).checked_mul(8).ok_or_else(|| FieldError::InvalidMetadata("grid too large".into()))?;
    if payload.len() as u64 != expected {
        return Err(FieldError::PayloadSizeMismatch {
            expected,
            actual: payload.len() as u64,
        });
    }
    let (re_bytes, im_bytes) = payload.split_at(n * 4);
    let plane = |bytes: &[u8]| -> Vec<f64> {
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect()
    };
    let values = plane(re_bytes)
        .into_iter()
        .zip(plane(im_bytes))
        .map(|(re, im)| Complex64::new(re, im))
        .collect();
    ComplexField::new(meta, values)
}

pub fn write_field(field: &ComplexField, path: &Path) -> Result<()> {
    let (sidecar, payload) = encode_field(field);
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| FieldError::Io { path: p, source }
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io(parent))?;
    }
    fs::write(path, payload).map_err(io(path))?;
    let meta_path = sidecar_path(path);
    fs::write(&meta_path, sidecar).map_err(io(&meta_path))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ComplexField> {
    let meta_path = sidecar_path(path);
    let sidecar = fs::read_to_string(&meta_path).map_err(|source| FieldError::Io {
        path: meta_path.clone(),
        source,
    })?;
    let payload = fs::read(path).map_err(|source| FieldError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_field(&sidecar, &payload)
}
