//! Adapters for external command-line codecs.
//!
//! A codec is described by two command templates. Placeholders `{in}`,
//! `{out}`, `{width}`, `{height}`, `{qp}` and `{rate}` are substituted per
//! argument (templates are split on whitespace, no shell is involved). Planes
//! travel as raw 8-bit row-major files with no header, so an identity template
//! such as `cp {in} {out}` costs exactly 8 bits per pixel.

use super::wavelet::rate_tolerance;
use super::{CodecError, Result};
use crate::field::GrayImage;
use std::collections::BTreeMap;
use std::fs;
use std::io::ErrorKind;
use std::path::Path;
use std::process::Command;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QpRange {
    pub min: i32,
    pub max: i32,
}

impl Default for QpRange {
    fn default() -> Self {
        QpRange { min: 0, max: 51 }
    }
}

/// How the target rate reaches the encoder, inferred from the template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateControl {
    /// `{qp}`: bisection on an integer quantization parameter.
    Qp,
    /// `{rate}`: the target bpp is passed through.
    Rate,
    /// Neither: a single fixed-rate run.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalCodec {
    pub name: String,
    pub encode: String,
    pub decode: String,
    pub qp_range: QpRange,
}

pub(crate) struct ExternalOutput {
    pub decoded: GrayImage,
    pub bitstream_bytes: usize,
    pub target_reached: bool,
}

struct Vars<'a> {
    input: &'a Path,
    output: &'a Path,
    width: usize,
    height: usize,
    qp: Option<i32>,
    rate: f64,
}

impl ExternalCodec {
    pub fn new(name: impl Into<String>, encode: impl Into<String>, decode: impl Into<String>) -> Self {
        ExternalCodec {
            name: name.into(),
            encode: encode.into(),
            decode: decode.into(),
            qp_range: QpRange::default(),
        }
    }

    pub fn rate_control(&self) -> RateControl {
        if self.encode.contains("{qp}") {
            RateControl::Qp
        } else if self.encode.contains("{rate}") {
            RateControl::Rate
        } else {
            RateControl::Fixed
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(CodecError::Config("external codec needs a name".into()));
        }
        for (what, t) in [("encode", &self.encode), ("decode", &self.decode)] {
            if !t.contains("{in}") || !t.contains("{out}") {
                return Err(CodecError::Config(format!("{what} template must use {{in}} and {{out}}: `{t}`")));
            }
        }
        if self.qp_range.min > self.qp_range.max {
            return Err(CodecError::Config(format!(
                "empty QP range {}..={}",
                self.qp_range.min, self.qp_range.max
            )));
        }
        Ok(())
    }

    pub(crate) fn compress(&self, plane: &GrayImage, target_bpp: f64) -> Result<ExternalOutput> {
        self.validate()?;
        if !(target_bpp.is_finite() && target_bpp > 0.0) {
            return Err(CodecError::InvalidRate(target_bpp));
        }
        let dir = tempfile::tempdir().map_err(|source| CodecError::Io { path: std::env::temp_dir(), source })?;
        let raw = dir.path().join("plane.raw");
        let stream = dir.path().join("plane.bit");
        let decoded_path = dir.path().join("decoded.raw");
        fs::write(&raw, &plane.pixels).map_err(|source| CodecError::Io { path: raw.clone(), source })?;
        let pixels = (plane.width * plane.height) as f64;

        let encode_at = |qp: Option<i32>| -> Result<usize> {
            let _ = fs::remove_file(&stream);
            run(&self.encode, &Vars {
                input: &raw,
                output: &stream,
                width: plane.width,
                height: plane.height,
                qp,
                rate: target_bpp,
            })?;
            let meta = fs::metadata(&stream)
                .map_err(|_| CodecError::BadOutput(format!("encoder wrote no bitstream to {}", stream.display())))?;
            Ok(meta.len() as usize)
        };

        let bytes = match self.rate_control() {
            RateControl::Qp => {
                let (qp, _) = select_qp(self.qp_range, target_bpp, |qp| {
                    Ok(encode_at(Some(qp))? as f64 * 8.0 / pixels)
                })?;
                // the last probe may not be the chosen one
                encode_at(Some(qp))?
            }
            RateControl::Rate | RateControl::Fixed => encode_at(None)?,
        };

        run(&self.decode, &Vars {
            input: &stream,
            output: &decoded_path,
            width: plane.width,
            height: plane.height,
            qp: None,
            rate: target_bpp,
        })?;
        let data = fs::read(&decoded_path)
            .map_err(|_| CodecError::BadOutput(format!("decoder wrote nothing to {}", decoded_path.display())))?;
        if data.len() != plane.pixels.len() {
            return Err(CodecError::BadOutput(format!(
                "decoded plane has {} bytes, expected {}",
                data.len(),
                plane.pixels.len()
            )));
        }
        let achieved = bytes as f64 * 8.0 / pixels;
        Ok(ExternalOutput {
            decoded: GrayImage { width: plane.width, height: plane.height, pixels: data },
            bitstream_bytes: bytes,
            target_reached: ((achieved - target_bpp) / target_bpp).abs() <= rate_tolerance(target_bpp),
        })
    }
}

fn expand(template: &str, vars: &Vars) -> Vec<String> {
    let qp = vars.qp.map(|q| q.to_string()).unwrap_or_default();
    template
        .split_whitespace()
        .map(|arg| {
            arg.replace("{in}", &vars.input.to_string_lossy())
                .replace("{out}", &vars.output.to_string_lossy())
                .replace("{width}", &vars.width.to_string())
                .replace("{height}", &vars.height.to_string())
                .replace("{qp}", &qp)
                .replace("{rate}", &vars.rate.to_string())
        })
        .collect()
}

fn run(template: &str, vars: &Vars) -> Result<()> {
    let argv = expand(template, vars);
    let Some((program, args)) = argv.split_first() else {
        return Err(CodecError::Config("empty command template".into()));
    };
    let out = Command::new(program).args(args).output().map_err(|e| match e.kind() {
        ErrorKind::NotFound | ErrorKind::PermissionDenied => CodecError::Unavailable { program: program.clone() },
        _ => CodecError::CommandFailed {
            program: program.clone(),
            status: "spawn failed".into(),
            stderr: e.to_string(),
        },
    })?;
    if !out.status.success() {
        let stderr = String::from_utf8_lossy(&out.stderr);
        let tail: String = stderr.trim().chars().rev().take(400).collect::<Vec<_>>().into_iter().rev().collect();
        return Err(CodecError::CommandFailed {
            program: program.clone(),
            status: out.status.to_string(),
            stderr: tail,
        });
    }
    Ok(())
}

/// Picks the QP whose rate is nearest the target, assuming rate does not
/// increase with QP. Returns the QP and its rate. Each QP is probed at most once.
pub fn select_qp(range: QpRange, target_bpp: f64, mut bpp_at: impl FnMut(i32) -> Result<f64>) -> Result<(i32, f64)> {
    if range.min > range.max {
        return Err(CodecError::Config(format!("empty QP range {}..={}", range.min, range.max)));
    }
    let mut seen = BTreeMap::new();
    let mut probe = |qp: i32| -> Result<f64> {
        if let Some(&v) = seen.get(&qp) {
            return Ok(v);
        }
        let v = bpp_at(qp)?;
        seen.insert(qp, v);
        Ok(v)
    };
    // smallest QP at or below the target
    let (mut lo, mut hi) = (range.min, range.max);
    if probe(hi)? > target_bpp {
        return Ok((hi, probe(hi)?));
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if probe(mid)? <= target_bpp {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let below = probe(lo)?;
    if lo > range.min {
        let above = probe(lo - 1)?;
        if (above - target_bpp).abs() <= (below - target_bpp).abs() {
            return Ok((lo - 1, above));
        }
    }
    Ok((lo, below))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn plane() -> GrayImage {
        GrayImage { width: 16, height: 8, pixels: (0..128).map(|i| (i * 2) as u8).collect() }
    }

    #[test]
    fn detects_rate_control() {
        assert_eq!(ExternalCodec::new("a", "enc -q {qp} {in} {out}", "d {in} {out}").rate_control(), RateControl::Qp);
        assert_eq!(ExternalCodec::new("a", "enc -r {rate} {in} {out}", "d {in} {out}").rate_control(), RateControl::Rate);
        assert_eq!(ExternalCodec::new("a", "cp {in} {out}", "cp {in} {out}").rate_control(), RateControl::Fixed);
        assert!(ExternalCodec::new("a", "cp {in}", "cp {in} {out}").validate().is_err());
    }

    #[test]
    fn expands_placeholders_per_argument() {
        let vars = Vars {
            input: Path::new("/a/in.raw"),
            output: Path::new("/b/out"),
            width: 4,
            height: 3,
            qp: Some(22),
            rate: 0.5,
        };
        assert_eq!(
            expand("enc --size={width}x{height} -q {qp} -r {rate} {in} {out}", &vars),
            ["enc", "--size=4x3", "-q", "22", "-r", "0.5", "/a/in.raw", "/b/out"]
        );
    }

    #[test]
    fn identity_template_is_lossless_at_8_bpp() {
        let codec = ExternalCodec::new("copy", "cp {in} {out}", "cp {in} {out}");
        let out = codec.compress(&plane(), 1.0).unwrap();
        assert_eq!(out.decoded, plane());
        assert_eq!(out.bitstream_bytes, 128);
    }

    #[test]
    fn missing_binary_is_unavailable() {
        let codec = ExternalCodec::new("nope", "holoqa-no-such-encoder {in} {out}", "cp {in} {out}");
        assert!(matches!(codec.compress(&plane(), 1.0), Err(CodecError::Unavailable { .. })));
    }

    #[test]
    fn failure_modes_are_distinct() {
        let failing = ExternalCodec::new("f", "false {in} {out}", "cp {in} {out}");
        assert!(matches!(failing.compress(&plane(), 1.0), Err(CodecError::CommandFailed { .. })));
        let silent = ExternalCodec::new("s", "true {in} {out}", "cp {in} {out}");
        assert!(matches!(silent.compress(&plane(), 1.0), Err(CodecError::BadOutput(_))));
        let short = ExternalCodec::new("t", "cp {in} {out}", "dd if={in} of={out} bs=1 count=10");
        assert!(matches!(short.compress(&plane(), 1.0), Err(CodecError::BadOutput(_))));
    }

    #[test]
    fn qp_stub_table() {
        // bpp for QP 0..=10
        let table = [9.0, 6.0, 4.0, 2.6, 1.6, 1.0, 0.74, 0.5, 0.3, 0.2, 0.1];
        let range = QpRange { min: 0, max: 10 };
        let pick = |t: f64| select_qp(range, t, |qp| Ok(table[qp as usize])).unwrap();
        assert_eq!(pick(0.75), (6, 0.74));
        assert_eq!(pick(0.25), (8, 0.3));
        assert_eq!(pick(1.5), (4, 1.6));
        assert_eq!(pick(100.0), (0, 9.0));
        assert_eq!(pick(0.01), (10, 0.1));
    }

    proptest! {
        #[test]
        fn qp_matches_exhaustive_search(
            steps in prop::collection::vec(0.0f64..2.0, 1..60),
            target in 0.0f64..30.0,
        ) {
            // monotone nonincreasing table built from decrements
            let mut table = Vec::new();
            let mut v = 40.0;
            for s in &steps {
                table.push(v);
                v -= s.min(v);
            }
            let range = QpRange { min: 0, max: table.len() as i32 - 1 };
            let mut calls = 0;
            let (qp, bpp) = select_qp(range, target, |q| { calls += 1; Ok(table[q as usize]) }).unwrap();
            let best = table.iter().map(|b| (b - target).abs()).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(bpp, table[qp as usize]);
            prop_assert!((bpp - target).abs() <= best + 1e-12);
            prop_assert!(calls <= 10);
        }
    }
}
