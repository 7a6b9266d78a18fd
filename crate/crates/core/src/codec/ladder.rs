//! Compresses a hologram at every (codec, rate) cell and records a manifest.
//!
//! Each cell quantizes the field to two 8-bit planes, runs them through the
//! codec independently at the target per-plane rate, maps the decoded levels
//! back to the original ranges and writes the distorted hologram. A failing
//! cell is recorded in the manifest and does not stop the others.

use super::{Codec, CodecError, PlaneResult, Result};
use crate::field::{dequantize8, quantize8, write_field, ComplexField, GrayImage, QuantizedField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.csv";

/// One distorted hologram. Rates are per plane; `achieved_bpp` is the mean of
/// the two planes, `bitstream_bytes` their sum and `psnr_db` is computed over
/// both planes together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub hologram_id: String,
    pub codec: String,
    pub plane: String,
    pub target_bpp: f64,
    pub achieved_bpp: Option<f64>,
    pub bitstream_bytes: Option<usize>,
    pub psnr_db: Option<f64>,
    pub output_path: String,
    pub status: String,
    pub achieved_bpp_re: Option<f64>,
    pub achieved_bpp_im: Option<f64>,
    pub psnr_re_db: Option<f64>,
    pub psnr_im_db: Option<f64>,
}

impl LadderRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok" || self.status == "off-target"
    }
}

#[derive(Debug, Clone)]
pub struct Ladder {
    pub rows: Vec<LadderRow>,
    pub manifest_path: PathBuf,
}

impl Ladder {
    pub fn failures(&self) -> impl Iterator<Item = &LadderRow> {
        self.rows.iter().filter(|r| !r.is_ok())
    }
}

fn bpp_label(bpp: f64) -> String {
    format!("{bpp}").replace('.', "p")
}

fn safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}

/// Payload file name of the distorted hologram for a cell.
pub fn output_name(hologram_id: &str, codec: &str, bpp: f64) -> String {
    format!("{}_{}_{}bpp.hfield", safe(hologram_id), safe(codec), bpp_label(bpp))
}

fn combined_psnr(a: &PlaneResult, b: &PlaneResult) -> f64 {
    // equal plane sizes: mean of the two MSEs
    let mse = |p: f64| if p.is_infinite() { 0.0 } else { 255.0f64.powi(2) / 10f64.powf(p / 10.0) };
    let m = 0.5 * (mse(a.psnr_db) + mse(b.psnr_db));
    if m == 0.0 { f64::INFINITY } else { 10.0 * (255.0f64.powi(2) / m).log10() }
}

fn run_cell(
    q: &QuantizedField,
    planes: &(GrayImage, GrayImage),
    codec: &Codec,
    bpp: f64,
    path: &Path,
) -> Result<(PlaneResult, PlaneResult)> {
    let (re, im) = rayon::join(
        || codec.compress_plane(&planes.0, bpp),
        || codec.compress_plane(&planes.1, bpp),
    );
    let (re, im) = (re?, im?);
    let distorted = q.with_levels(re.decoded.pixels.clone(), im.decoded.pixels.clone())?;
    let field = dequantize8(&distorted)?;
    let meta = field.meta().clone().with_note(format!("codec {} {}bpp", codec.id(), bpp));
    write_field(&field.with_meta(meta)?, path)?;
    Ok((re, im))
}

/// Runs every codec at every rate on `holo`, writing distorted holograms and
/// `manifest.csv` into `out_dir`. Rows are ordered codec-major, then by rate.
pub fn build_ladder(
    holo: &ComplexField,
    hologram_id: &str,
    codecs: &[Codec],
    bpps: &[f64],
    out_dir: &Path,
) -> Result<Ladder> {
    if let Some(&bad) = bpps.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(CodecError::InvalidRate(bad));
    }
    fs::create_dir_all(out_dir).map_err(|source| CodecError::Io { path: out_dir.to_path_buf(), source })?;
    let q = quantize8(holo)?;
    let (w, h) = (holo.width(), holo.height());
    let planes = (
        GrayImage { width: w, height: h, pixels: q.real.levels.clone() },
        GrayImage { width: w, height: h, pixels: q.imag.levels.clone() },
    );
    let cells: Vec<(&Codec, f64)> = codecs.iter().flat_map(|c| bpps.iter().map(move |&b| (c, b))).collect();
    let rows = cells
        .par_iter()
        .map(|&(codec, bpp)| {
            let name = output_name(hologram_id, codec.id(), bpp);
            let path = out_dir.join(&name);
            let mut row = LadderRow {
                hologram_id: hologram_id.to_string(),
                codec: codec.id().to_string(),
                plane: "re+im".into(),
                target_bpp: bpp,
                achieved_bpp: None,
                bitstream_bytes: None,
                psnr_db: None,
                output_path: name,
                status: String::new(),
                achieved_bpp_re: None,
                achieved_bpp_im: None,
                psnr_re_db: None,
                psnr_im_db: None,
            };
            match run_cell(&q, &planes, codec, bpp, &path) {
                Ok((re, im)) => {
                    row.achieved_bpp = Some(0.5 * (re.achieved_bpp + im.achieved_bpp));
                    row.bitstream_bytes = Some(re.bitstream_bytes + im.bitstream_bytes);
                    row.psnr_db = Some(combined_psnr(&re, &im));
                    row.achieved_bpp_re = Some(re.achieved_bpp);
                    row.achieved_bpp_im = Some(im.achieved_bpp);
                    row.psnr_re_db = Some(re.psnr_db);
                    row.psnr_im_db = Some(im.psnr_db);
                    row.status = if re.target_reached && im.target_reached { "ok" } else { "off-target" }.into();
                }
                Err(e) => {
                    row.output_path.clear();
                    row.status = format!("failed: {e}");
                }
            }
            row
        })
        .collect::<Vec<_>>();
    let manifest_path = out_dir.join(MANIFEST_FILE);
    write_manifest(&rows, &manifest_path)?;
    Ok(Ladder { rows, manifest_path })
}

pub fn write_manifest(rows: &[LadderRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| CodecError::Io { path: path.to_path_buf(), source })?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<LadderRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
