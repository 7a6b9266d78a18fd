//! Drives the `holoqa` binary through the toy configuration.

use serde_json::Value;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn toy_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy.toml")
}

fn holoqa(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holoqa"))
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env_remove("HOLOQA_SCORES")
        .env_remove("HOLOQA_DATA_DIR")
        .output()
        .unwrap()
}

fn ok(config: &Path, out: &Path, args: &[&str]) -> Value {
    let o = holoqa(config, out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn manifest(out: &Path, command: &str) -> Value {
    serde_json::from_slice(&std::fs::read(out.join("manifests").join(format!("{command}.json"))).unwrap()).unwrap()
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

const COPY_CODECS: [&str; 2] = ["copy_a=cp {in} {out}|cp {in} {out}", "copy_b=cp {in} {out}|cp {in} {out}"];

#[test]
fn synth_writes_one_hologram_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let line = ok(&toy_config(), out, &["synth"]);
    assert_eq!(line["command"], "synth");
    assert_eq!(line["summary"]["points"], 3);
    assert_eq!(line["summary"]["grid"], serde_json::json!([512, 512]));

    assert_eq!(files_under(&out.join("holograms")).len(), 2);
    let m = manifest(out, "synth");
    let outputs = m["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for e in outputs {
        let bytes = std::fs::read(out.join(e["path"].as_str().unwrap())).unwrap();
        assert_eq!(e["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(e["sha256"].as_str().unwrap().len(), 64);
    }
    assert!(m.to_string().find(&out.to_string_lossy().to_string()).is_none(), "manifest leaks absolute paths");
}

#[test]
fn ladder_runs_every_codec_at_every_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&toy_config(), out, &["synth"]);
    let mut args = vec!["ladder"];
    for c in COPY_CODECS {
        args.extend(["--external-codec", c]);
    }
    let line = ok(&toy_config(), out, &args);
    assert_eq!(line["summary"]["cells"], 12);
    assert_eq!(line["summary"]["failed"], 0);
    // an identity codec always spends 8 bpp, so it cannot meet any target
    assert_eq!(line["summary"]["off_target"], 8);

    let holograms: Vec<_> =
        files_under(&out.join("ladder")).into_iter().filter(|p| p.extension().is_some_and(|e| e == "hfield")).collect();
    assert_eq!(holograms.len(), 12);
    let csv = std::fs::read_to_string(out.join("ladder/manifest.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    assert!(csv.lines().filter(|l| l.contains("copy_a")).all(|l| l.contains("off-target")));
}

#[test]
fn failing_external_codec_is_reported_without_losing_other_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&toy_config(), out, &["synth"]);
    let o = holoqa(&toy_config(), out, &["ladder", "--external-codec", "broken=false {in} {out}|cp {in} {out}"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "ladder_failures");
    let m = manifest(out, "ladder");
    assert_eq!(m["summary"]["ok"], 4);
    assert_eq!(m["summary"]["failed"], 4);
}

fn full_run(out: &Path) {
    let config = toy_config();
    ok(&config, out, &["synth"]);
    ok(&config, out, &["reconstruct", "--dz", "-1e-3", "--dz", "0"]);
    ok(&config, out, &["ladder", "--external-codec", COPY_CODECS[0]]);
    ok(&config, out, &["render"]);
    ok(&config, out, &["analyze"]);
    ok(&config, out, &["report"]);
}

#[test]
fn full_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    full_run(a.path());
    full_run(b.path());
    let files = files_under(a.path());
    assert_eq!(files, files_under(b.path()));
    for f in &files {
        assert!(
            std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap(),
            "{} differs between runs",
            f.display()
        );
    }
    for expected in [
        "analyze/mos.csv",
        "analyze/zscores.csv",
        "analyze/fits.csv",
        "analyze/subjects.csv",
        "analyze/zscore_hist_all.svg",
        "analyze/fit_light_field_to_holographic_center.svg",
        "analyze/boxplots_holographic_vs_light_field_by_bpp.svg",
        "views/index.csv",
        "study/conditions.json",
        "report/report.md",
        "report/report.json",
    ] {
        assert!(files.contains(&PathBuf::from(expected)), "missing {expected}");
    }
    let fits = std::fs::read_to_string(a.path().join("analyze/fits.csv")).unwrap();
    assert_eq!(fits.lines().count(), 7);

    // the report sees every stage and nothing is stale
    let report = manifest(a.path(), "report");
    assert_eq!(report["summary"]["stale_outputs"], 0);
    assert_eq!(report["summary"]["manifests"], 5);

    // a rerun of analyze leaves its outputs untouched
    let before = std::fs::read(a.path().join("manifests/analyze.json")).unwrap();
    ok(&toy_config(), a.path(), &["analyze"]);
    assert_eq!(before, std::fs::read(a.path().join("manifests/analyze.json")).unwrap());
}

#[test]
fn seed_flag_changes_the_hologram() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&toy_config(), a.path(), &["synth"]);
    ok(&toy_config(), b.path(), &["--seed", "99", "synth"]);
    let sa = manifest(a.path(), "synth");
    let sb = manifest(b.path(), "synth");
    assert_ne!(sa["config_sha256"], sb["config_sha256"]);
    assert_ne!(sa["outputs"][0]["sha256"], sb["outputs"][0]["sha256"]);
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(toy_config()).unwrap();
    let cases = [
        (text.replace("wrp_count = 5", "wrp_count = \"five\""), "cgh.wrp_count"),
        (text.replace("wrp_count = 5", "wrp_count = 0"), "cgh.wrp_count"),
        (text.replace("bpps = [0.25, 0.5, 0.75, 1.5]", "bpps = [0.25, -1.0]"), "ladder.bpps[1]"),
        (text.replace("lut_levels = 64", "lut_levels = 64\ncolour = 1"), "cgh.colour"),
    ];
    for (i, (body, field)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.toml"));
        std::fs::write(&path, body).unwrap();
        let o = holoqa(&path, &dir.path().join("out"), &["synth"]);
        assert_eq!(o.status.code(), Some(2), "case {i}");
        let err: Value = serde_json::from_slice(&o.stderr).unwrap();
        assert_eq!(err["error"], "config", "case {i}");
        assert!(err["field"].as_str().unwrap().contains(field), "case {i}: {err}");
    }
    let o = holoqa(&toy_config(), dir.path(), &["--external-codec", "nameless", "synth"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stages_refuse_to_run_without_their_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = holoqa(&toy_config(), dir.path(), &["ladder"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["command"], "ladder");
    assert_eq!(err["error"], "missing_input");
    assert!(err["message"].as_str().unwrap().contains("synth"));
}

struct Child(std::process::Child);

impl Drop for Child {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_exposes_the_drafted_study() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&toy_config(), out, &["synth"]);
    ok(&toy_config(), out, &["ladder"]);
    ok(&toy_config(), out, &["render"]);

    let mut child = Child(
        Command::new(env!("CARGO_BIN_EXE_holoqa"))
            .arg("--config")
            .arg(toy_config())
            .arg("--out-dir")
            .arg(out)
            .args(["serve", "--addr", "127.0.0.1:0"])
            .env_remove("HOLOQA_DATA_DIR")
            .stdout(Stdio::piped())
            .spawn()
            .unwrap(),
    );
    let mut line = String::new();
    BufReader::new(child.0.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let hello: Value = serde_json::from_str(&line).unwrap();
    assert_eq!(hello["study"], "toy-study");
    let base = hello["listening"].as_str().unwrap();

    let client = reqwest::blocking::Client::new();
    let study: Value = client.get(format!("{base}/api/studies/toy-study")).send().unwrap().json().unwrap();
    assert_eq!(study["setup"], "holographic");
    // four target rates, two perspectives, two foci
    assert_eq!(study["conditions"], 16);

    let session = format!("{base}/api/studies/toy-study/sessions");
    let r = client.post(&session).json(&serde_json::json!({ "subject_id": "s01" })).send().unwrap();
    assert!(r.status().is_success());
    let next: Value = client.get(format!("{session}/s01/next")).send().unwrap().json().unwrap();
    assert_eq!(next["step"], "present");
    let url = next["stimuli"][0]["url"].as_str().unwrap();
    let image = client.get(format!("{base}{url}")).send().unwrap();
    assert_eq!(image.status(), 200);
    assert!(image.bytes().unwrap().starts_with(b"\x89PNG"));
    assert!(out.join("sessions/toy-study/journal.jsonl").is_file());
}
