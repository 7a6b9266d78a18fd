//! One function per subcommand. Each validates its prerequisites, writes its
//! outputs under the output directory and records them in a run manifest.
//!
//! Layout of the output directory:
//!
//! ```text
//! holograms/<scene>.hfield(.meta)   synth
//! reconstruct/<scene>_dz<dz>.png    reconstruct
//! ladder/manifest.csv, *.hfield     ladder
//! views/<target>/*.png, index.csv   render
//! fans/<target>/<name>/             render (light-field fans)
//! study/conditions.json             render (study draft for serve)
//! sessions/                         serve (study data and journals)
//! analyze/                          analyze
//! report/report.{md,json}           report
//! manifests/<command>.json          every command
//! ```

use holoqa_core::cgh::{build_lut, synthesize_hologram, PhaseMode, SynthesisOptions, WrpPlan};
use holoqa_core::codec::{build_ladder, read_manifest, Codec, Ladder, MANIFEST_FILE};
use holoqa_core::field::{read_field, sidecar_path, write_field};
use holoqa_core::stats::{
    difference_boxplots, fit_setups, mos, plot_boxplots, plot_fit, plot_zscore_histogram, subject_outliers,
    zscore_summary, FitConfig, Focus, OutlierPolicy, Perspective, ScoreTable, Setup,
};
use holoqa_core::view::{
    self, render_lightfield_fan, render_view, write_fan, write_view, DisplayTarget, ImageFormat, Provenance, ViewSpec,
};
use holoqa_session::{AppState, ConditionSpec, StudyConfig};
use rayon::prelude::*;
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::config::{ConfigError, ImageFormatConfig, PhaseModeConfig, PipelineConfig, SceneSource};
use crate::manifest::{display_path, entries, sha256_hex, RunManifest, MANIFEST_DIR};
use crate::scene::{build_cloud, depth};
use crate::{io_err, CliError, Result};

pub const ORIGINAL: &str = "original";
const COMMAND_ORDER: [&str; 7] = ["synth", "reconstruct", "ladder", "render", "serve", "analyze", "report"];

pub struct Context {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(config: PipelineConfig, out_dir: impl Into<PathBuf>) -> Self {
        Context { config, out_dir: out_dir.into() }
    }

    pub fn config_sha256(&self) -> String {
        sha256_hex(&serde_json::to_vec(&self.config).expect("config serializes"))
    }

    pub fn hologram_path(&self) -> PathBuf {
        self.out_dir.join("holograms").join(format!("{}.hfield", self.config.scene.name))
    }

    pub fn ladder_dir(&self) -> PathBuf {
        self.out_dir.join("ladder")
    }

    pub fn views_dir(&self) -> PathBuf {
        self.out_dir.join("views")
    }

    pub fn study_file(&self) -> PathBuf {
        self.out_dir.join("study").join("conditions.json")
    }

    pub fn analyze_dir(&self) -> PathBuf {
        self.out_dir.join("analyze")
    }

    fn finish(&self, command: &str, inputs: &[PathBuf], outputs: &[PathBuf], summary: serde_json::Value) -> Result<RunManifest> {
        let manifest = RunManifest {
            tool: concat!("holoqa ", env!("CARGO_PKG_VERSION")).to_string(),
            command: command.to_string(),
            config_sha256: self.config_sha256(),
            inputs: entries(&self.out_dir, inputs)?,
            outputs: entries(&self.out_dir, outputs)?,
            summary,
        };
        manifest.write(&self.out_dir)?;
        Ok(manifest)
    }

    fn require(&self, path: &Path, producer: &str) -> Result<()> {
        if path.is_file() {
            Ok(())
        } else {
            Err(CliError::Missing(format!("{} not found; run `holoqa {producer}` first", path.display())))
        }
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn field_files(path: &Path) -> [PathBuf; 2] {
    [path.to_path_buf(), sidecar_path(path)]
}

fn scene_inputs(config: &PipelineConfig) -> Vec<PathBuf> {
    match &config.scene.source {
        SceneSource::File { path } => vec![path.clone()],
        _ => Vec::new(),
    }
}

pub fn synth(ctx: &Context) -> Result<RunManifest> {
    let c = &ctx.config.cgh;
    let cloud = build_cloud(&ctx.config.scene, c.scene_center_distance)?;
    let plan = WrpPlan::for_cloud(&cloud, c.wrp_count, c.scene_center_distance)?;
    let phase = match c.phase_mode {
        PhaseModeConfig::Deterministic => PhaseMode::Deterministic,
        PhaseModeConfig::Random => PhaseMode::Random,
    };
    let lut = build_lut(c.wavelength, c.pitch, plan.slab_halfwidth(), c.lut_levels, phase, c.seed)?;
    let mut opts = SynthesisOptions::new(c.width, c.height);
    opts.occlusion_radius = c.occlusion.then_some(c.occlusion_radius);
    let holo = synthesize_hologram(&cloud, &plan, &lut, &opts)?;
    let path = ctx.hologram_path();
    write_field(&holo, &path)?;
    ctx.finish(
        "synth",
        &scene_inputs(&ctx.config),
        &field_files(&path),
        json!({
            "hologram": display_path(&ctx.out_dir, &path),
            "points": cloud.len(),
            "scene_depth_m": depth(&cloud),
            "wrp_count": plan.wrp_count(),
            "slab_halfwidth_m": plan.slab_halfwidth(),
            "grid": [c.width, c.height],
            "seed": c.seed,
        }),
    )
}

fn view_perspective(p: Perspective) -> view::Perspective {
    match p {
        Perspective::Center => view::Perspective::Center,
        Perspective::RightCorner => view::Perspective::RightCorner,
    }
}

fn view_focus(f: Focus) -> view::Focus {
    match f {
        Focus::Front => view::Focus::Front,
        Focus::Back => view::Focus::Back,
        Focus::Single => view::Focus::Single,
    }
}

fn display_target(s: Setup) -> DisplayTarget {
    match s {
        Setup::Holographic => DisplayTarget::Holographic,
        Setup::LightField => DisplayTarget::LightField,
        Setup::Flat2d => DisplayTarget::Flat2d,
    }
}

/// Full-aperture object-plane reconstructions at each refocus offset.
pub fn reconstruct(ctx: &Context, input: Option<&Path>, offsets: &[f64]) -> Result<RunManifest> {
    let path = input.map_or_else(|| ctx.hologram_path(), Path::to_path_buf);
    ctx.require(&path, "synth")?;
    let holo = read_field(&path)?;
    let dir = ctx.out_dir.join("reconstruct");
    mkdir(&dir)?;
    let offsets = if offsets.is_empty() { &[0.0][..] } else { offsets };
    let mut outputs = Vec::new();
    for &dz in offsets {
        let spec = ViewSpec {
            perspective: view::Perspective::Center,
            aperture: (holo.width(), holo.height()),
            focus: view::Focus::Custom(dz),
            display_target: DisplayTarget::Flat2d,
            scene_depth: 0.0,
        };
        let image = render_view(&holo, &spec, Provenance::new(&ctx.config.scene.name, ORIGINAL, None))?;
        let out = dir.join(format!("{}_dz{dz:+e}.png", ctx.config.scene.name));
        let bytes = view::encode_png(&image.image).map_err(|reason| view::ViewError::Encode { path: out.clone(), reason })?;
        std::fs::write(&out, bytes).map_err(io_err(&out))?;
        outputs.push(out);
    }
    let mut inputs = field_files(&path).to_vec();
    inputs.sort();
    ctx.finish("reconstruct", &inputs, &outputs, json!({ "offsets_m": offsets }))
}

pub fn codecs(config: &PipelineConfig) -> Vec<Codec> {
    let builtin = config.ladder.builtin.then_some(Codec::Wavelet);
    builtin.into_iter().chain(config.ladder.external.iter().map(|e| Codec::External(e.codec()))).collect()
}

pub fn ladder(ctx: &Context, input: Option<&Path>) -> Result<RunManifest> {
    let path = input.map_or_else(|| ctx.hologram_path(), Path::to_path_buf);
    ctx.require(&path, "synth")?;
    let holo = read_field(&path)?;
    let dir = ctx.ladder_dir();
    let Ladder { rows, manifest_path } =
        build_ladder(&holo, &ctx.config.scene.name, &codecs(&ctx.config), &ctx.config.ladder.bpps, &dir)?;
    let mut outputs = vec![manifest_path];
    for row in rows.iter().filter(|r| r.is_ok()) {
        outputs.extend(field_files(&dir.join(&row.output_path)));
    }
    let failed: Vec<String> =
        rows.iter().filter(|r| !r.is_ok()).map(|r| format!("{} @ {} bpp: {}", r.codec, r.target_bpp, r.status)).collect();
    let count = |s: &str| rows.iter().filter(|r| r.status == s).count();
    let manifest = ctx.finish(
        "ladder",
        &field_files(&path),
        &outputs,
        json!({
            "cells": rows.len(),
            "ok": count("ok"),
            "off_target": count("off-target"),
            "failed": failed.len(),
            "codecs": ctx.config.codec_ids(),
            "bpps": ctx.config.ladder.bpps,
        }),
    )?;
    if failed.is_empty() {
        Ok(manifest)
    } else {
        Err(CliError::LadderFailures { count: failed.len(), detail: failed.join("; ") })
    }
}

struct Source {
    codec: String,
    bpp: Option<f64>,
    path: PathBuf,
}

struct ViewRecord {
    codec: String,
    bpp: Option<f64>,
    target: Setup,
    perspective: Perspective,
    focus: Focus,
    /// Relative to the views directory.
    file: String,
}

/// Renders every configured view of the original hologram and of each
/// successful ladder output, then drafts the study for `serve`.
pub fn render(ctx: &Context) -> Result<RunManifest> {
    let r = ctx
        .config
        .render
        .as_ref()
        .ok_or_else(|| ConfigError::new("render", "a [render] section is required for this command"))?;
    let original = ctx.hologram_path();
    ctx.require(&original, "synth")?;
    let scene_depth = match r.scene_depth {
        Some(d) => d,
        None => depth(&build_cloud(&ctx.config.scene, ctx.config.cgh.scene_center_distance)?),
    };
    let format = match r.format {
        ImageFormatConfig::Png => ImageFormat::Png,
        ImageFormatConfig::Pgm => ImageFormat::Pgm,
    };
    let ext = match format {
        ImageFormat::Png => "png",
        ImageFormat::Pgm => "pgm",
    };

    let mut inputs = field_files(&original).to_vec();
    let mut sources = vec![Source { codec: ORIGINAL.into(), bpp: None, path: original }];
    let ladder_manifest = ctx.ladder_dir().join(MANIFEST_FILE);
    if ladder_manifest.is_file() {
        inputs.push(ladder_manifest.clone());
        for row in read_manifest(&ladder_manifest)?.into_iter().filter(|r| r.is_ok()) {
            let path = ctx.ladder_dir().join(&row.output_path);
            inputs.extend(field_files(&path));
            sources.push(Source { codec: row.codec, bpp: Some(row.target_bpp), path });
        }
    }

    let specs: Vec<(Setup, Perspective, Focus)> = r
        .views
        .iter()
        .flat_map(|v| v.perspectives.iter().flat_map(move |&p| v.foci.iter().map(move |&f| (v.target, p, f))))
        .collect();
    let spec_of = |target: Setup, perspective: Perspective, focus: Focus| ViewSpec {
        perspective: view_perspective(perspective),
        aperture: (r.aperture[0], r.aperture[1]),
        focus: view_focus(focus),
        display_target: display_target(target),
        scene_depth,
    };
    let name = &ctx.config.scene.name;
    let views_dir = ctx.views_dir();
    let mut outputs = Vec::new();
    let mut records = Vec::new();
    let mut fans = 0;
    for src in &sources {
        let holo = read_field(&src.path)?;
        let provenance = Provenance::new(name, &src.codec, src.bpp);
        let images = specs
            .par_iter()
            .map(|&(t, p, f)| render_view(&holo, &spec_of(t, p, f), provenance.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        for (&(target, perspective, focus), image) in specs.iter().zip(&images) {
            let dir = views_dir.join(target.as_str());
            mkdir(&dir)?;
            let path = write_view(&dir, image, format)?;
            records.push(ViewRecord {
                codec: src.codec.clone(),
                bpp: src.bpp,
                target,
                perspective,
                focus,
                file: display_path(&views_dir, &path),
            });
            outputs.push(path);
        }
        for v in r.views.iter().filter(|v| v.target == Setup::LightField) {
            let Some(count) = v.view_count else { continue };
            for &focus in &v.foci {
                let fan = render_lightfield_fan(&holo, count, &spec_of(v.target, Perspective::Center, focus), &provenance)?;
                let dir = ctx.out_dir.join("fans").join(v.target.as_str()).join(format!(
                    "{name}_{}_{}_{focus}",
                    src.codec,
                    provenance.bpp_label()
                ));
                outputs.push(write_fan(&dir, &fan, format)?);
                outputs.extend(fan.iter().map(|img| dir.join(img.provenance.file_name().replace(".png", &format!(".{ext}")))));
                fans += 1;
            }
        }
    }

    let index = views_dir.join("index.csv");
    let mut text = String::from("hologram,codec,bpp,target,perspective,focus,file\n");
    for rec in &records {
        let bpp = rec.bpp.map_or_else(String::new, |b| b.to_string());
        let _ = writeln!(text, "{name},{},{bpp},{},{},{},{}", rec.codec, rec.target, rec.perspective, rec.focus, rec.file);
    }
    write_text(&index, &text)?;
    outputs.push(index);

    let study = draft_study(ctx, &records);
    let conditions = study.as_ref().map_or(0, |s| s.conditions.len());
    if let Some(study) = study {
        let path = ctx.study_file();
        mkdir(path.parent().expect("study file has a parent"))?;
        let mut json = serde_json::to_string_pretty(&study).expect("study serializes");
        json.push('\n');
        write_text(&path, &json)?;
        outputs.push(path);
    }
    inputs.sort();
    ctx.finish(
        "render",
        &inputs,
        &outputs,
        json!({
            "holograms": sources.len(),
            "views": records.len(),
            "fans": fans,
            "scene_depth_m": scene_depth,
            "study_conditions": conditions,
        }),
    )
}

/// Pairs every distorted view of the study's display setup with the
/// original rendered under the same view.
fn draft_study(ctx: &Context, records: &[ViewRecord]) -> Option<StudyConfig> {
    let s = &ctx.config.study;
    let conditions: Vec<ConditionSpec> = records
        .iter()
        .filter(|rec| rec.target == s.setup && rec.bpp.is_some())
        .filter_map(|rec| {
            let reference = records.iter().find(|o| {
                o.bpp.is_none() && o.target == rec.target && o.perspective == rec.perspective && o.focus == rec.focus
            })?;
            Some((rec, reference))
        })
        .enumerate()
        .map(|(i, (rec, reference))| ConditionSpec {
            id: format!("c{i:03}"),
            hologram: ctx.config.scene.name.clone(),
            codec: rec.codec.clone(),
            bpp: rec.bpp.expect("distorted views have a rate"),
            perspective: rec.perspective,
            focus: rec.focus,
            reference: reference.file.clone().into(),
            impaired: rec.file.clone().into(),
        })
        .collect();
    (!conditions.is_empty()).then(|| StudyConfig {
        name: ctx.config.study_name().to_string(),
        seed: s.seed,
        setup: s.setup,
        presentation: s.presentation,
        stimulus_root: "../views".into(),
        conditions,
        timing: s.timing,
        limits: s.limits,
    })
}

/// Loads the session service state under `data_dir` and registers the study
/// drafted by `render`, if any. Returns the state and the study id.
pub fn prepare_serve(ctx: &Context, data_dir: &Path) -> Result<(Arc<AppState>, Option<String>)> {
    let state = AppState::load(data_dir)?;
    let file = ctx.study_file();
    if !file.is_file() {
        return Ok((state, None));
    }
    let text = std::fs::read(&file).map_err(io_err(&file))?;
    let mut study: StudyConfig = serde_json::from_slice(&text)
        .map_err(|e| CliError::Missing(format!("{}: {e}", file.display())))?;
    let base = file.parent().expect("study file has a parent");
    let root = base.join(&study.stimulus_root);
    study.stimulus_root = root.canonicalize().map_err(io_err(&root))?;
    let created = state.create_study(study)?;
    let id = created.id().to_string();
    Ok((state, Some(id)))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Statistics over a score table: MOS, Z-scores, subject screening, the
/// configured setup-to-setup fits and difference boxplots.
pub fn analyze(ctx: &Context, scores: Option<&Path>) -> Result<RunManifest> {
    let st = &ctx.config.stats;
    let path = scores
        .map(Path::to_path_buf)
        .or_else(|| st.scores.clone())
        .unwrap_or_else(|| ctx.out_dir.join("study").join("export.csv"));
    ctx.require(&path, "serve` and export the scores, or pass `--scores")?;
    let table = ScoreTable::read_csv(&path)?;
    let policy = OutlierPolicy::new(st.whisker)?;
    let m = mos(&table, policy);
    let dir = ctx.analyze_dir();
    mkdir(&dir)?;
    let mut outputs = Vec::new();

    let mos_path = dir.join("mos.csv");
    m.write_csv(std::fs::File::create(&mos_path).map_err(io_err(&mos_path))?)?;
    outputs.push(mos_path);

    let present: Vec<Setup> = Setup::ALL.into_iter().filter(|s| table.records().iter().any(|r| r.setup == *s)).collect();
    let mut z_csv = String::from("setup,n,within_1,within_2,degenerate_conditions\n");
    let mut z_summary = serde_json::Map::new();
    for (label, setup) in present.iter().map(|s| (s.as_str(), Some(*s))).chain([("all", None)]) {
        let z = zscore_summary(&m, setup);
        let _ = writeln!(z_csv, "{label},{},{},{},{}", z.n, z.within_1, z.within_2, z.degenerate.len());
        z_summary.insert(label.into(), json!({ "within_1": z.within_1, "within_2": z.within_2 }));
        if z.n > 0 {
            let svg = dir.join(format!("zscore_hist_{label}.svg"));
            plot_zscore_histogram(&z, &svg)?;
            outputs.push(svg);
        }
    }
    let z_path = dir.join("zscores.csv");
    write_text(&z_path, &z_csv)?;
    outputs.push(z_path);

    let subjects = subject_outliers(&m, st.subject_outlier_percent);
    let mut s_csv = String::from("subject_id,screened,outliers,percent,flagged\n");
    for s in &subjects {
        let _ = writeln!(s_csv, "{},{},{},{},{}", s.subject, s.screened, s.outliers, s.percent, s.flagged);
    }
    let s_path = dir.join("subjects.csv");
    write_text(&s_path, &s_csv)?;
    outputs.push(s_path);

    let mut f_csv = String::from(
        "source,target,perspective,pairs,p1,p2,p3,p4,p5,pearson_before,spearman_before,pearson_after,spearman_after,max_perturbation_error,status\n",
    );
    let mut fitted = 0;
    for spec in &st.fits {
        let head = format!("{},{},{}", spec.source, spec.target, spec.perspective);
        let config = FitConfig { source: spec.source, target: spec.target, perspective: spec.perspective, policy };
        let missing = [spec.source, spec.target].into_iter().find(|s| !present.contains(s));
        let result = match missing {
            Some(s) => Err(format!("no scores for {s}")),
            None => fit_setups(&table, &config).map_err(|e| e.to_string()),
        };
        match result {
            Ok(fit) => {
                let p = fit.fit.poly.0;
                let q = &fit.fit;
                let _ = writeln!(
                    f_csv,
                    "{head},{},{},{},{},{},{},{},{},{},{},{},ok",
                    fit.pairs.x.len(),
                    p[0],
                    p[1],
                    p[2],
                    p[3],
                    p[4],
                    fmt_opt(q.pearson_before),
                    fmt_opt(q.spearman_before),
                    fmt_opt(q.pearson_after),
                    fmt_opt(q.spearman_after),
                    fit.max_perturbation_error
                );
                let svg = dir.join(format!("fit_{}_to_{}_{}.svg", spec.source, spec.target, spec.perspective));
                plot_fit(&fit, &svg)?;
                outputs.push(svg);
                fitted += 1;
            }
            Err(reason) => {
                let _ = writeln!(f_csv, "{head},,,,,,,,,,,,skipped: {}", reason.replace([',', '\n'], ";"));
            }
        }
    }
    let f_path = dir.join("fits.csv");
    write_text(&f_path, &f_csv)?;
    outputs.push(f_path);

    let averaged = m.focus_averaged();
    for spec in &st.boxplots {
        let boxes = difference_boxplots(&averaged, spec.first, spec.second, spec.group_by.into());
        let stem = format!(
            "boxplots_{}_vs_{}_by_{}",
            spec.first,
            spec.second,
            match spec.group_by {
                crate::config::GroupByConfig::Hologram => "hologram",
                crate::config::GroupByConfig::Bpp => "bpp",
            }
        );
        let csv_path = dir.join(format!("{stem}.csv"));
        boxes.write_csv(std::fs::File::create(&csv_path).map_err(io_err(&csv_path))?)?;
        outputs.push(csv_path);
        if !boxes.rows.is_empty() {
            let svg = dir.join(format!("{stem}.svg"));
            plot_boxplots(&boxes, &svg)?;
            outputs.push(svg);
        }
    }

    ctx.finish(
        "analyze",
        &[path],
        &outputs,
        json!({
            "scores": table.len(),
            "conditions": m.conditions.len(),
            "subjects": subjects.len(),
            "flagged_subjects": subjects.iter().filter(|s| s.flagged).count(),
            "fits": fitted,
            "zscores": z_summary,
        }),
    )
}

fn markdown_table(csv: &str, columns: &[&str]) -> String {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else { return String::new() };
    let names: Vec<&str> = header.split(',').collect();
    let idx: Vec<usize> = columns.iter().filter_map(|c| names.iter().position(|n| n == c)).collect();
    let mut out = format!("| {} |\n|{}\n", idx.iter().map(|&i| names[i]).collect::<Vec<_>>().join(" | "), "---|".repeat(idx.len()));
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let row: Vec<&str> = idx.iter().map(|&i| cells.get(i).copied().unwrap_or("")).collect();
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
    out
}

/// Aggregates the run manifests, plus the ladder and fit tables they list,
/// into a Markdown and a JSON report. Nothing is recomputed; outputs whose
/// contents no longer match their manifest are marked stale.
pub fn report(ctx: &Context) -> Result<RunManifest> {
    let mdir = ctx.out_dir.join(MANIFEST_DIR);
    let mut manifests = Vec::new();
    let mut inputs = Vec::new();
    if mdir.is_dir() {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&mdir)
            .map_err(io_err(&mdir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json") && !p.ends_with("report.json"))
            .collect();
        let rank = |p: &PathBuf| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            (COMMAND_ORDER.iter().position(|c| *c == stem).unwrap_or(COMMAND_ORDER.len()), stem)
        };
        paths.sort_by_key(rank);
        for p in paths {
            manifests.push(RunManifest::read(&p)?);
            inputs.push(p);
        }
    }
    if manifests.is_empty() {
        return Err(CliError::Missing(format!("no run manifests under {}; run other subcommands first", mdir.display())));
    }

    let mut md = format!("# Run report: {}\n", ctx.config.scene.name);
    let mut stale = Vec::new();
    for m in &manifests {
        let _ = write!(md, "\n## {}\n\n", m.command);
        if let Some(obj) = m.summary.as_object() {
            for (k, v) in obj {
                let _ = writeln!(md, "- {k}: {v}");
            }
        }
        let _ = write!(md, "\n| output | bytes | sha256 |\n|---|---|---|\n");
        for f in &m.outputs {
            let current = std::fs::read(ctx.out_dir.join(&f.path)).ok().map(|b| sha256_hex(&b));
            let mark = if current.as_deref() == Some(f.sha256.as_str()) { "" } else { " (stale)" };
            if !mark.is_empty() {
                stale.push(f.path.clone());
            }
            let _ = writeln!(md, "| {}{mark} | {} | {} |", f.path, f.bytes, &f.sha256[..12]);
        }
        for (file, title, columns) in [
            (
                "ladder/manifest.csv",
                "Compression ladder",
                &["codec", "target_bpp", "achieved_bpp_re", "achieved_bpp_im", "psnr_db", "status"][..],
            ),
            (
                "analyze/fits.csv",
                "Setup fits",
                &["source", "target", "perspective", "pairs", "pearson_after", "spearman_after", "max_perturbation_error", "status"][..],
            ),
            ("analyze/zscores.csv", "Z-scores", &["setup", "n", "within_1", "within_2"][..]),
        ] {
            if m.outputs.iter().any(|f| f.path == file) {
                let path = ctx.out_dir.join(file);
                let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
                let _ = write!(md, "\n### {title}\n\n{}", markdown_table(&text, columns));
            }
        }
    }
    if !stale.is_empty() {
        let _ = write!(md, "\n{} output(s) changed since their manifest was written.\n", stale.len());
    }

    let dir = ctx.out_dir.join("report");
    mkdir(&dir)?;
    let md_path = dir.join("report.md");
    write_text(&md_path, &md)?;
    let json_path = dir.join("report.json");
    let mut json_text = serde_json::to_string_pretty(&json!({ "manifests": manifests, "stale": stale })).expect("report serializes");
    json_text.push('\n');
    write_text(&json_path, &json_text)?;
    ctx.finish(
        "report",
        &inputs,
        &[md_path, json_path],
        json!({ "manifests": manifests.len(), "stale_outputs": stale.len() }),
    )
}
