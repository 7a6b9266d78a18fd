//! Display stimuli: sub-aperture crops, refocused intensity images, light
//! field view fans and 8-bit export.

use crate::field::{encode_pgm, ComplexField, FieldError, GrayImage};
use crate::propagation::{refocus, PropagationError};
use rayon::prelude::*;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ViewError {
    #[error("aperture {aperture:?} at offset {offset:?} does not fit a {grid:?} hologram")]
    OutOfBounds {
        aperture: (usize, usize),
        offset: (usize, usize),
        grid: (usize, usize),
    },
    #[error("{requested} views of width {aperture} do not fit a {width}-pixel hologram; at most {max_views} distinct views are possible")]
    FanTooWide {
        requested: usize,
        aperture: usize,
        width: usize,
        max_views: usize,
    },
    #[error("view count must be at least 1")]
    EmptyFan,
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot encode {path}: {reason}")]
    Encode { path: PathBuf, reason: String },
}

pub type Result<T, E = ViewError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perspective {
    Center,
    RightCorner,
    Custom { offset_x: usize, offset_y: usize },
}

impl Perspective {
    /// Top-left crop offset for an aperture inside a grid.
    pub fn offset(self, grid: (usize, usize), aperture: (usize, usize)) -> Result<(usize, usize)> {
        let (gw, gh) = grid;
        let (aw, ah) = aperture;
        let out = |offset| ViewError::OutOfBounds { aperture, offset, grid };
        if aw == 0 || ah == 0 || aw > gw || ah > gh {
            return Err(out((0, 0)));
        }
        let offset = match self {
            Perspective::Center => ((gw - aw) / 2, (gh - ah) / 2),
            Perspective::RightCorner => (gw - aw, (gh - ah) / 2),
            Perspective::Custom { offset_x, offset_y } => (offset_x, offset_y),
        };
        if offset.0 + aw > gw || offset.1 + ah > gh {
            return Err(out(offset));
        }
        Ok(offset)
    }

    pub fn label(self) -> String {
        match self {
            Perspective::Center => "center".into(),
            Perspective::RightCorner => "right-corner".into(),
            Perspective::Custom { offset_x, offset_y } => format!("x{offset_x}y{offset_y}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Focus {
    /// A quarter of the scene depth in front of the scene center.
    Front,
    /// A quarter of the scene depth behind the scene center.
    Back,
    /// The scene center plane.
    Single,
    Custom(f64),
}

impl Focus {
    /// Refocus offset in meters, positive = deeper into the scene.
    pub fn delta_z(self, scene_depth: f64) -> f64 {
        match self {
            Focus::Front => -scene_depth / 4.0,
            Focus::Back => scene_depth / 4.0,
            Focus::Single => 0.0,
            Focus::Custom(dz) => dz,
        }
    }

    pub fn label(self) -> String {
        match self {
            Focus::Front => "front".into(),
            Focus::Back => "back".into(),
            Focus::Single => "single".into(),
            Focus::Custom(dz) => format!("dz{dz:+e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisplayTarget {
    Holographic,
    LightField,
    Flat2d,
}

impl DisplayTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            DisplayTarget::Holographic => "holographic",
            DisplayTarget::LightField => "light_field",
            DisplayTarget::Flat2d => "flat_2d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewSpec {
    pub perspective: Perspective,
    pub aperture: (usize, usize),
    pub focus: Focus,
    pub display_target: DisplayTarget,
    /// Axial extent of the scene in meters, used to resolve front/back focus.
    pub scene_depth: f64,
}

/// Identifies what a rendered image shows.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub hologram: String,
    pub codec: String,
    /// `None` for the uncompressed reference.
    pub bpp: Option<f64>,
    pub perspective: String,
    pub focus: String,
    pub offset: (usize, usize),
    pub view: String,
}

fn sanitize(s: &str) -> String {
    let out: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' || c == '+' { c } else { '-' })
        .collect();
    if out.is_empty() { "-".into() } else { out }
}

impl Provenance {
    pub fn new(hologram: impl Into<String>, codec: impl Into<String>, bpp: Option<f64>) -> Self {
        Provenance {
            hologram: hologram.into(),
            codec: codec.into(),
            bpp,
            perspective: String::new(),
            focus: String::new(),
            offset: (0, 0),
            view: "0".into(),
        }
    }

    pub fn bpp_label(&self) -> String {
        self.bpp.map_or_else(|| "ref".into(), |b| format!("{b:.2}"))
    }

    /// `<holo>_<codec>_<bpp>_<persp>_<focus>_<view>.png`
    pub fn file_name(&self) -> String {
        format!(
            "{}_{}_{}_{}_{}_{}.png",
            sanitize(&self.hologram),
            sanitize(&self.codec),
            self.bpp_label(),
            sanitize(&self.perspective),
            sanitize(&self.focus),
            sanitize(&self.view)
        )
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} / {} @ {} bpp / {} / {}",
            self.hologram,
            self.codec,
            self.bpp_label(),
            self.perspective,
            self.focus
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewImage {
    pub image: GrayImage,
    pub provenance: Provenance,
}

pub fn extract_aperture(holo: &ComplexField, spec: &ViewSpec) -> Result<ComplexField> {
    let (ox, oy) = spec.perspective.offset((holo.width(), holo.height()), spec.aperture)?;
    crop(holo, ox, oy, spec.aperture)
}

fn crop(holo: &ComplexField, ox: usize, oy: usize, (aw, ah): (usize, usize)) -> Result<ComplexField> {
    let w = holo.width();
    let mut values = Vec::with_capacity(aw * ah);
    for row in oy..oy + ah {
        values.extend_from_slice(&holo.values()[row * w + ox..row * w + ox + aw]);
    }
    let meta = holo.meta().resized(aw, ah).with_note(format!("crop {aw}x{ah} at ({ox},{oy})"));
    Ok(ComplexField::new(meta, values)?)
}

/// Linear map to 0..=255 after clipping at the 99.9th percentile (nearest
/// rank). All-zero input maps to black.
pub fn tone_map(intensity: &[f64]) -> Vec<u8> {
    if intensity.is_empty() {
        return Vec::new();
    }
    let mut sorted = intensity.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((0.999 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let clip = sorted[rank - 1];
    if !(clip > 0.0) {
        return vec![0; intensity.len()];
    }
    intensity
        .iter()
        .map(|&v| (255.0 * v.clamp(0.0, clip) / clip).round() as u8)
        .collect()
}

/// Undoes the point reflection of a Fourier reconstruction so images show
/// the scene the way a viewer sees it.
fn upright(intensity: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(intensity.len());
    for row in 0..height {
        for col in 0..width {
            out.push(intensity[((height - row) % height) * width + (width - col) % width]);
        }
    }
    out
}

fn render_at(holo: &ComplexField, offset: (usize, usize), spec: &ViewSpec, mut provenance: Provenance) -> Result<ViewImage> {
    let crop = crop(holo, offset.0, offset.1, spec.aperture)?;
    let focused = refocus(&crop, spec.focus.delta_z(spec.scene_depth))?;
    let pixels = tone_map(&upright(&focused.intensity(), spec.aperture.0, spec.aperture.1));
    provenance.perspective = spec.perspective.label();
    provenance.focus = spec.focus.label();
    provenance.offset = offset;
    Ok(ViewImage {
        image: GrayImage {
            width: spec.aperture.0,
            height: spec.aperture.1,
            pixels,
        },
        provenance,
    })
}

pub fn render_view(holo: &ComplexField, spec: &ViewSpec, provenance: Provenance) -> Result<ViewImage> {
    let offset = spec.perspective.offset((holo.width(), holo.height()), spec.aperture)?;
    render_at(holo, offset, spec, provenance)
}

/// Horizontal crop offsets of an evenly spaced view fan, left to right.
pub fn fan_offsets(width: usize, aperture: usize, view_count: usize) -> Result<Vec<usize>> {
    if view_count == 0 {
        return Err(ViewError::EmptyFan);
    }
    if aperture == 0 || aperture > width {
        return Err(ViewError::OutOfBounds {
            aperture: (aperture, 0),
            offset: (0, 0),
            grid: (width, 0),
        });
    }
    let span = width - aperture;
    if view_count == 1 {
        return Ok(vec![span / 2]);
    }
    if view_count > span + 1 {
        return Err(ViewError::FanTooWide {
            requested: view_count,
            aperture,
            width,
            max_views: span + 1,
        });
    }
    Ok((0..view_count)
        .map(|i| ((i * span) as f64 / (view_count - 1) as f64).round() as usize)
        .collect())
}

/// Renders `view_count` views across the hologram width. `spec.perspective`
/// is ignored; each view gets a custom offset, vertically centered.
pub fn render_lightfield_fan(
    holo: &ComplexField,
    view_count: usize,
    spec: &ViewSpec,
    provenance: &Provenance,
) -> Result<Vec<ViewImage>> {
    let (aw, ah) = spec.aperture;
    if ah == 0 || ah > holo.height() {
        return Err(ViewError::OutOfBounds {
            aperture: spec.aperture,
            offset: (0, 0),
            grid: (holo.width(), holo.height()),
        });
    }
    let offsets = fan_offsets(holo.width(), aw, view_count)?;
    let oy = (holo.height() - ah) / 2;
    offsets
        .par_iter()
        .enumerate()
        .map(|(i, &ox)| {
            let view_spec = if view_count == 1 {
                ViewSpec { perspective: Perspective::Center, ..*spec }
            } else {
                ViewSpec {
                    perspective: Perspective::Custom { offset_x: ox, offset_y: oy },
                    ..*spec
                }
            };
            let mut p = provenance.clone();
            p.view = format!("{i:03}");
            render_at(holo, (ox, oy), &view_spec, p)
        })
        .collect()
}

pub fn encode_png(image: &GrayImage) -> std::result::Result<Vec<u8>, String> {
    let buffer = image::GrayImage::from_raw(image.width as u32, image.height as u32, image.pixels.clone())
        .ok_or_else(|| "pixel buffer does not match dimensions".to_string())?;
    let mut out = io::Cursor::new(Vec::new());
    buffer
        .write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| e.to_string())?;
    Ok(out.into_inner())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Pgm,
}

/// Writes the view under its provenance file name (extension swapped for
/// PGM) and returns the path.
pub fn write_view(dir: &Path, view: &ViewImage, format: ImageFormat) -> Result<PathBuf> {
    let name = view.provenance.file_name();
    let (path, bytes) = match format {
        ImageFormat::Png => {
            let path = dir.join(&name);
            let bytes = encode_png(&view.image).map_err(|reason| ViewError::Encode { path: path.clone(), reason })?;
            (path, bytes)
        }
        ImageFormat::Pgm => (dir.join(name.replace(".png", ".pgm")), encode_pgm(&view.image)),
    };
    std::fs::write(&path, bytes).map_err(|source| ViewError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Writes every view plus `index.csv` (`view_index,offset_x,focus,filename`).
pub fn write_fan(dir: &Path, views: &[ViewImage], format: ImageFormat) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| ViewError::Io { path: dir.to_path_buf(), source })?;
    let index = dir.join("index.csv");
    let io_err = |source: io::Error| ViewError::Io { path: index.clone(), source };
    let mut writer = csv::Writer::from_path(&index).map_err(|e| io_err(e.into()))?;
    writer
        .write_record(["view_index", "offset_x", "focus", "filename"])
        .map_err(|e| io_err(e.into()))?;
    for (i, view) in views.iter().enumerate() {
        let path = write_view(dir, view, format)?;
        let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        writer
            .write_record([i.to_string(), view.provenance.offset.0.to_string(), view.provenance.focus.clone(), file_name])
            .map_err(|e| io_err(e.into()))?;
    }
    writer.flush().map_err(io_err)?;
    Ok(index)
}
