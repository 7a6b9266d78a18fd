//! Pipeline configuration: one TOML file describing the scene, synthesis,
//! compression ladder, views, study protocol and statistics.
//!
//! Relative paths are resolved against the directory holding the file.
//! Errors name the offending field as a dotted path.

use holoqa_core::codec::{ExternalCodec, QpRange, BUILTIN_ID};
use holoqa_core::stats::{Focus, GroupBy, Perspective, Setup};
use holoqa_session::{Limits, Presentation, Timing};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    /// Dotted path to the offending field, `.` for the whole file.
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub scene: SceneConfig,
    pub cgh: CghConfig,
    #[serde(default)]
    pub ladder: LadderConfig,
    pub render: Option<RenderConfig>,
    #[serde(default)]
    pub study: StudySettings,
    #[serde(default)]
    pub stats: StatsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Hologram id used in file names and score tables.
    pub name: String,
    /// Point coordinates are relative to the scene center, which sits
    /// `cgh.scene_center_distance` in front of the hologram.
    pub source: SceneSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneSource {
    /// ASCII XYZ or PLY point cloud.
    File { path: PathBuf },
    /// `[x, y, z]` or `[x, y, z, amplitude]` rows.
    Points { points: Vec<Vec<f64>> },
    /// Fibonacci lattice on a sphere surface.
    Sphere { radius: f64, count: usize },
    /// Regular grid on a plane tilted about the vertical axis.
    Plane { width: f64, height: f64, columns: usize, rows: usize, #[serde(default)] tilt_deg: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseModeConfig {
    Deterministic,
    #[default]
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CghConfig {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    pub pitch: f64,
    pub scene_center_distance: f64,
    pub wrp_count: usize,
    #[serde(default = "default_lut_levels")]
    pub lut_levels: usize,
    #[serde(default)]
    pub phase_mode: PhaseModeConfig,
    #[serde(default = "default_true")]
    pub occlusion: bool,
    #[serde(default = "default_occlusion_radius")]
    pub occlusion_radius: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_wavelength() -> f64 {
    532e-9
}

fn default_lut_levels() -> usize {
    64
}

fn default_true() -> bool {
    true
}

fn default_occlusion_radius() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    #[serde(default = "default_bpps")]
    pub bpps: Vec<f64>,
    /// Include the built-in wavelet codec.
    #[serde(default = "default_true")]
    pub builtin: bool,
    #[serde(default)]
    pub external: Vec<ExternalSpec>,
}

fn default_bpps() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.5]
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig { bpps: default_bpps(), builtin: true, external: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub name: String,
    pub encode: String,
    pub decode: String,
    #[serde(default)]
    pub qp_min: i32,
    #[serde(default = "default_qp_max")]
    pub qp_max: i32,
}

fn default_qp_max() -> i32 {
    51
}

impl ExternalSpec {
    pub fn codec(&self) -> ExternalCodec {
        let mut c = ExternalCodec::new(&self.name, &self.encode, &self.decode);
        c.qp_range = QpRange { min: self.qp_min, max: self.qp_max };
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageFormatConfig {
    #[default]
    Png,
    Pgm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    /// Sub-aperture `[width, height]` in pixels.
    pub aperture: [usize; 2],
    /// Axial scene extent used to place the front and back focus planes;
    /// defaults to the depth range of the point cloud.
    pub scene_depth: Option<f64>,
    #[serde(default)]
    pub format: ImageFormatConfig,
    pub views: Vec<ViewConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewConfig {
    pub target: Setup,
    #[serde(default = "default_perspectives")]
    pub perspectives: Vec<Perspective>,
    #[serde(default = "default_foci")]
    pub foci: Vec<Focus>,
    /// Views in the exported light-field fan; light-field targets only.
    pub view_count: Option<usize>,
}

fn default_perspectives() -> Vec<Perspective> {
    vec![Perspective::Center]
}

fn default_foci() -> Vec<Focus> {
    vec![Focus::Front, Focus::Back]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySettings {
    /// Defaults to the scene name.
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_setup")]
    pub setup: Setup,
    #[serde(default)]
    pub presentation: Presentation,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub limits: Limits,
}

fn default_setup() -> Setup {
    Setup::Holographic
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings {
            name: None,
            seed: 0,
            setup: Setup::Holographic,
            presentation: Presentation::default(),
            timing: Timing::default(),
            limits: Limits::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    /// Score CSV to analyze; defaults to the exported study scores.
    pub scores: Option<PathBuf>,
    #[serde(default = "default_whisker")]
    pub whisker: f64,
    #[serde(default = "default_subject_threshold")]
    pub subject_outlier_percent: f64,
    #[serde(default = "default_fits")]
    pub fits: Vec<FitSpec>,
    #[serde(default)]
    pub boxplots: Vec<BoxplotSpec>,
}

fn default_whisker() -> f64 {
    1.5
}

fn default_subject_threshold() -> f64 {
    15.0
}

/// Every ordered display pair toward the more faithful display, per view.
fn default_fits() -> Vec<FitSpec> {
    let pairs = [
        (Setup::LightField, Setup::Holographic),
        (Setup::Flat2d, Setup::Holographic),
        (Setup::Flat2d, Setup::LightField),
    ];
    [Perspective::Center, Perspective::RightCorner]
        .into_iter()
        .flat_map(|perspective| pairs.map(|(source, target)| FitSpec { source, target, perspective }))
        .collect()
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            scores: None,
            whisker: default_whisker(),
            subject_outlier_percent: default_subject_threshold(),
            fits: default_fits(),
            boxplots: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub source: Setup,
    pub target: Setup,
    pub perspective: Perspective,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxplotSpec {
    pub first: Setup,
    pub second: Setup,
    #[serde(default = "default_group_by")]
    pub group_by: GroupByConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupByConfig {
    Hologram,
    Bpp,
}

fn default_group_by() -> GroupByConfig {
    GroupByConfig::Bpp
}

impl From<GroupByConfig> for GroupBy {
    fn from(g: GroupByConfig) -> Self {
        match g {
            GroupByConfig::Hologram => GroupBy::Hologram,
            GroupByConfig::Bpp => GroupBy::Bpp,
        }
    }
}

/// Parses TOML text without touching the file system.
pub fn parse(text: &str) -> Result<PipelineConfig, ConfigError> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| ConfigError::new(".", e.to_string().trim_end()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        ConfigError::new(field, e.inner().to_string().trim_end())
    })
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be a positive number, got {v}")))
    }
}

impl PipelineConfig {
    /// Reads, parses, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(".", format!("cannot read {}: {e}", path.display())))?;
        let mut config = parse(&text)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let SceneSource::File { path } = &mut self.scene.source {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(scores) = &mut self.stats.scores {
            if scores.is_relative() {
                *scores = base.join(&*scores);
            }
        }
    }

    pub fn study_name(&self) -> &str {
        self.study.name.as_deref().unwrap_or(&self.scene.name)
    }

    /// Codec ids in ladder order.
    pub fn codec_ids(&self) -> Vec<&str> {
        let builtin = self.ladder.builtin.then_some(BUILTIN_ID);
        builtin.into_iter().chain(self.ladder.external.iter().map(|e| e.name.as_str())).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let id_ok = |s: &str| !s.is_empty() && s.len() <= 64 && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
        if !id_ok(&self.scene.name) {
            return Err(ConfigError::new("scene.name", "must be 1-64 characters of [A-Za-z0-9_-]"));
        }
        match &self.scene.source {
            SceneSource::File { path } => {
                if !path.is_file() {
                    return Err(ConfigError::new("scene.source.path", format!("{} does not exist", path.display())));
                }
            }
            SceneSource::Points { points } => {
                if let Some(i) = points.iter().position(|p| !(3..=4).contains(&p.len())) {
                    return Err(ConfigError::new(
                        format!("scene.source.points[{i}]"),
                        "expected [x, y, z] or [x, y, z, amplitude]",
                    ));
                }
            }
            SceneSource::Sphere { radius, count } => {
                positive("scene.source.radius", *radius)?;
                if *count == 0 {
                    return Err(ConfigError::new("scene.source.count", "must be at least 1"));
                }
            }
            SceneSource::Plane { width, height, columns, rows, tilt_deg } => {
                positive("scene.source.width", *width)?;
                positive("scene.source.height", *height)?;
                if *columns == 0 || *rows == 0 {
                    return Err(ConfigError::new("scene.source", "columns and rows must be at least 1"));
                }
                if !(tilt_deg.is_finite() && tilt_deg.abs() < 90.0) {
                    return Err(ConfigError::new("scene.source.tilt_deg", "must lie in (-90, 90)"));
                }
            }
        }

        let c = &self.cgh;
        if c.width < 2 || c.height < 2 {
            return Err(ConfigError::new("cgh.width", "grid must be at least 2x2"));
        }
        positive("cgh.wavelength", c.wavelength)?;
        positive("cgh.pitch", c.pitch)?;
        positive("cgh.scene_center_distance", c.scene_center_distance)?;
        if c.wrp_count == 0 {
            return Err(ConfigError::new("cgh.wrp_count", "must be at least 1"));
        }
        if c.lut_levels == 0 {
            return Err(ConfigError::new("cgh.lut_levels", "must be at least 1"));
        }
        if c.occlusion {
            positive("cgh.occlusion_radius", c.occlusion_radius)?;
        }

        for (i, b) in self.ladder.bpps.iter().enumerate() {
            positive(&format!("ladder.bpps[{i}]"), *b)?;
            if self.ladder.bpps[..i].contains(b) {
                return Err(ConfigError::new(format!("ladder.bpps[{i}]"), format!("{b} bpp is listed twice")));
            }
        }
        let mut names = BTreeSet::new();
        if self.ladder.builtin {
            names.insert(BUILTIN_ID.to_string());
        }
        for (i, e) in self.ladder.external.iter().enumerate() {
            if !id_ok(&e.name) || !names.insert(e.name.clone()) {
                return Err(ConfigError::new(format!("ladder.external[{i}].name"), "must be a unique id of [A-Za-z0-9_-]"));
            }
            e.codec().validate().map_err(|err| ConfigError::new(format!("ladder.external[{i}]"), err.to_string()))?;
        }

        if let Some(r) = &self.render {
            let [aw, ah] = r.aperture;
            if aw == 0 || ah == 0 || aw > c.width || ah > c.height {
                return Err(ConfigError::new(
                    "render.aperture",
                    format!("{aw}x{ah} does not fit the {}x{} hologram", c.width, c.height),
                ));
            }
            if let Some(d) = r.scene_depth {
                if !(d.is_finite() && d >= 0.0) {
                    return Err(ConfigError::new("render.scene_depth", "must be non-negative"));
                }
            }
            if r.views.is_empty() {
                return Err(ConfigError::new("render.views", "at least one view is required"));
            }
            for (i, v) in r.views.iter().enumerate() {
                if v.perspectives.is_empty() || v.foci.is_empty() {
                    return Err(ConfigError::new(format!("render.views[{i}]"), "perspectives and foci must be nonempty"));
                }
                match (v.target, v.view_count) {
                    (Setup::LightField, Some(0)) => {
                        return Err(ConfigError::new(format!("render.views[{i}].view_count"), "must be at least 1"));
                    }
                    (Setup::LightField, _) | (_, None) => {}
                    (_, Some(_)) => {
                        return Err(ConfigError::new(
                            format!("render.views[{i}].view_count"),
                            "only light_field targets render a view fan",
                        ));
                    }
                }
            }
        }

        if let Some(name) = &self.study.name {
            if !id_ok(name) {
                return Err(ConfigError::new("study.name", "must be 1-64 characters of [A-Za-z0-9_-]"));
            }
        }

        let s = &self.stats;
        positive("stats.whisker", s.whisker)?;
        if !(0.0..=100.0).contains(&s.subject_outlier_percent) {
            return Err(ConfigError::new("stats.subject_outlier_percent", "must lie in [0, 100]"));
        }
        if let Some(scores) = &s.scores {
            if !scores.is_file() {
                return Err(ConfigError::new("stats.scores", format!("{} does not exist", scores.display())));
            }
        }
        for (i, f) in s.fits.iter().enumerate() {
            if f.source == f.target {
                return Err(ConfigError::new(format!("stats.fits[{i}]"), "source and target setups must differ"));
            }
        }
        for (i, b) in s.boxplots.iter().enumerate() {
            if b.first == b.second {
                return Err(ConfigError::new(format!("stats.boxplots[{i}]"), "first and second setups must differ"));
            }
        }
        Ok(())
    }
}

/// Parses `name=ENCODE|DECODE`, the command-line form of an external codec.
pub fn parse_external_flag(flag: &str) -> Result<ExternalSpec, ConfigError> {
    let bad = |m: &str| ConfigError::new("--external-codec", format!("{m}: `{flag}`"));
    let (name, templates) = flag.split_once('=').ok_or_else(|| bad("expected name=ENCODE|DECODE"))?;
    let (encode, decode) = templates.split_once('|').ok_or_else(|| bad("expected ENCODE|DECODE templates"))?;
    let spec = ExternalSpec {
        name: name.trim().to_string(),
        encode: encode.trim().to_string(),
        decode: decode.trim().to_string(),
        qp_min: 0,
        qp_max: default_qp_max(),
    };
    spec.codec().validate().map_err(|e| bad(&e.to_string()))?;
    Ok(spec)
}
