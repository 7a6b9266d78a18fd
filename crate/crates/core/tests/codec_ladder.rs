use holoqa_core::cgh::{build_lut, synthesize_hologram, PhaseMode, Point, PointCloud, SynthesisOptions, WrpPlan};
use holoqa_core::codec::{
    build_ladder, decode_plane, encode_plane, rate_tolerance, Analysis, Codec, ExternalCodec, BUILTIN_ID,
};
use holoqa_core::field::{quantize8, read_field, ComplexField, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

const LAMBDA: f64 = 532e-9;
const PITCH: f64 = 3.45e-6;
const RATES: [f64; 4] = [0.25, 0.5, 0.75, 1.5];

fn synthetic_hologram(n: usize) -> ComplexField {
    let r = n as f64 * PITCH * PITCH / LAMBDA;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let half = 0.4 * n as f64 * PITCH;
    let points = (0..1500)
        .map(|_| Point {
            x: rng.random_range(-half..half),
            y: rng.random_range(-half..half),
            z: r + rng.random_range(-0.5e-3..0.5e-3),
            amplitude: rng.random_range(0.2..1.0),
        })
        .collect();
    let cloud = PointCloud::new(points, "synthetic").unwrap();
    let plan = WrpPlan::for_cloud(&cloud, 4, r).unwrap();
    let lut = build_lut(LAMBDA, PITCH, plan.slab_halfwidth(), 32, PhaseMode::Random, 3).unwrap();
    synthesize_hologram(&cloud, &plan, &lut, &SynthesisOptions::new(n, n)).unwrap()
}

fn planes(holo: &ComplexField) -> (GrayImage, GrayImage) {
    let q = quantize8(holo).unwrap();
    let (w, h) = (holo.width(), holo.height());
    (
        GrayImage { width: w, height: h, pixels: q.real.levels },
        GrayImage { width: w, height: h, pixels: q.imag.levels },
    )
}

#[test]
fn builtin_ladder_hits_rates_and_is_monotone() {
    let holo = synthetic_hologram(512);
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let ladder = build_ladder(&holo, "synthetic", &[Codec::Wavelet], &RATES, dir.path()).unwrap();
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "ladder took {elapsed:?}");
    assert_eq!(ladder.rows.len(), 4);
    let mut last = f64::NEG_INFINITY;
    for row in &ladder.rows {
        assert_eq!(row.status, "ok");
        assert_eq!(row.codec, BUILTIN_ID);
        for bpp in [row.achieved_bpp_re.unwrap(), row.achieved_bpp_im.unwrap()] {
            let err = (bpp - row.target_bpp).abs() / row.target_bpp;
            assert!(err <= rate_tolerance(row.target_bpp), "{} -> {bpp}", row.target_bpp);
        }
        let psnr = row.psnr_db.unwrap();
        assert!(psnr > last, "psnr {psnr} after {last}");
        last = psnr;
        let distorted = read_field(&dir.path().join(&row.output_path)).unwrap();
        assert_eq!(distorted.meta().reference_distance, holo.meta().reference_distance);
    }
}

#[test]
fn ladder_is_deterministic() {
    let holo = synthetic_hologram(128);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let la = build_ladder(&holo, "h", &[Codec::Wavelet], &RATES, a.path()).unwrap();
    let lb = build_ladder(&holo, "h", &[Codec::Wavelet], &RATES, b.path()).unwrap();
    assert_eq!(la.rows, lb.rows);
    for row in &la.rows {
        let fa = std::fs::read(a.path().join(&row.output_path)).unwrap();
        let fb = std::fs::read(b.path().join(&row.output_path)).unwrap();
        assert_eq!(fa, fb);
    }
}

#[test]
fn planes_are_coded_independently() {
    let holo = synthetic_hologram(128);
    let (re, im) = planes(&holo);
    let bre = encode_plane(&re, 0.75).unwrap().bytes;
    let bim = encode_plane(&im, 0.75).unwrap().bytes;
    let clean_im = decode_plane(&bim).unwrap();
    // damage the real stream's payload; the imaginary decode cannot notice
    let mut damaged = bre.clone();
    let mid = damaged.len() / 2;
    for b in &mut damaged[mid..mid + 16] {
        *b ^= 0x5a;
    }
    let re_after = decode_plane(&damaged);
    assert!(re_after.map(|p| p != decode_plane(&bre).unwrap()).unwrap_or(true));
    assert_eq!(decode_plane(&bim).unwrap(), clean_im);
}

#[test]
fn rates_are_reached_on_both_planes_of_a_hologram() {
    let holo = synthetic_hologram(256);
    let (re, im) = planes(&holo);
    for plane in [&re, &im] {
        let analysis = Analysis::new(plane).unwrap();
        let mut last = 0.0;
        for target in RATES {
            let enc = encode_plane(plane, target).unwrap();
            assert!(enc.target_reached, "{target} -> {}", enc.achieved_bpp);
            assert_eq!(analysis.encode(enc.step).unwrap(), enc.bytes);
            let psnr = holoqa_core::codec::psnr(&plane.pixels, &decode_plane(&enc.bytes).unwrap().pixels);
            assert!(psnr > last);
            last = psnr;
        }
    }
}

#[test]
fn external_qp_sweep_uses_stub_encoder() {
    // stub encoder: emits (52 - qp) * 40 bytes, decoder returns a flat plane
    let dir = tempfile::tempdir().unwrap();
    let enc = dir.path().join("enc.sh");
    let dec = dir.path().join("dec.sh");
    std::fs::write(&enc, "#!/bin/sh\nhead -c $(( (52 - $1) * 40 )) /dev/zero > \"$3\"\n").unwrap();
    std::fs::write(&dec, "#!/bin/sh\nhead -c $(( $3 * $4 )) /dev/zero > \"$2\"\n").unwrap();
    for script in [&enc, &dec] {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(script, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
    let codec = ExternalCodec::new(
        "stub",
        format!("{} {{qp}} {{in}} {{out}}", enc.display()),
        format!("{} {{in}} {{out}} {{width}} {{height}}", dec.display()),
    );
    let plane = GrayImage { width: 64, height: 64, pixels: vec![9; 4096] };
    // 0.5 bpp of 4096 px = 256 bytes; nearest size is 240 (qp 46) or 280 (qp 45)
    let out = Codec::External(codec).compress_plane(&plane, 0.5).unwrap();
    assert_eq!(out.bitstream_bytes, 240);
    assert!(out.decoded.pixels.iter().all(|&p| p == 0));
}
