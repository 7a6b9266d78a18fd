use super::{CghError, PhaseMode, PointCloud, PsfLut, Result, WrpPlan};
use crate::field::{ComplexField, FieldMetadata, Geometry};
use crate::propagation::{apply_fresnel, asm_in_place, object_plane_pitch, propagate_asm, FresnelDirection};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub width: usize,
    pub height: usize,
    /// Radius in pixels of the occlusion footprint; `None` disables masking.
    pub occlusion_radius: Option<f64>,
}

impl SynthesisOptions {
    pub fn new(width: usize, height: usize) -> Self {
        SynthesisOptions {
            width,
            height,
            occlusion_radius: Some(1.0),
        }
    }

    pub fn without_occlusion(mut self) -> Self {
        self.occlusion_radius = None;
        self
    }
}

struct Placed {
    row: usize,
    col: usize,
    weight: Complex64,
    dz: f64,
}

fn lateral_pixel(coord: f64, pitch: f64, size: usize) -> Option<usize> {
    let idx = (coord / pitch).round() + (size / 2) as f64;
    (idx >= 0.0 && idx < size as f64).then_some(idx as usize)
}

fn place_points(cloud: &PointCloud, plan: &WrpPlan, lut: &PsfLut, opts: &SynthesisOptions) -> Result<Vec<Vec<Placed>>> {
    let mut outside_aperture = Vec::new();
    let mut outside_depth = Vec::new();
    let mut slabs: Vec<Vec<Placed>> = (0..plan.wrp_count()).map(|_| Vec::new()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(lut.seed);
    for (i, p) in cloud.points.iter().enumerate() {
        let phase = match lut.phase_mode {
            PhaseMode::Random => rng.random::<f64>() * 2.0 * PI,
            PhaseMode::Deterministic => 0.0,
        };
        let row = lateral_pixel(p.y, lut.pitch, opts.height);
        let col = lateral_pixel(p.x, lut.pitch, opts.width);
        let slab = plan.slab_of(p.z);
        if row.is_none() || col.is_none() {
            outside_aperture.push(i);
        }
        if slab.is_none() {
            outside_depth.push(i);
        }
        if let (Some(row), Some(col), Some(s)) = (row, col, slab) {
            slabs[s].push(Placed {
                row,
                col,
                weight: Complex64::from_polar(p.amplitude, phase),
                dz: p.z - plan.wrp_z()[s],
            });
        }
    }
    if !outside_aperture.is_empty() {
        return Err(CghError::OutsideAperture { indices: outside_aperture });
    }
    if !outside_depth.is_empty() {
        return Err(CghError::OutsideDepthRange { indices: outside_depth });
    }
    Ok(slabs)
}

fn mask_disk(values: &mut [Complex64], width: usize, height: usize, row: usize, col: usize, radius: f64) {
    let r = radius.floor() as isize;
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dx * dx + dy * dy) as f64) <= radius * radius {
                let rr = (row as isize + dy).rem_euclid(height as isize) as usize;
                let cc = (col as isize + dx).rem_euclid(width as isize) as usize;
                values[rr * width + cc] = Complex64::new(0.0, 0.0);
            }
        }
    }
}

fn stamp(values: &mut [Complex64], width: usize, height: usize, point: &Placed, lut: &PsfLut) {
    let (kernel, conjugate) = lut.lookup(point.dz);
    let r = kernel.radius as isize;
    for dy in -r..=r {
        let rr = (point.row as isize + dy).rem_euclid(height as isize) as usize;
        for dx in -r..=r {
            let k = kernel.at(dy, dx);
            if k.re == 0.0 && k.im == 0.0 {
                continue;
            }
            let k = if conjugate { k.conj() } else { k };
            let cc = (point.col as isize + dx).rem_euclid(width as isize) as usize;
            values[rr * width + cc] += point.weight * k;
        }
    }
}

/// Accumulates the cloud back to front over the plan's WRPs and returns the
/// field at the WRP nearest to the hologram.
///
/// Lateral positions are rounded to the nearest pixel of the hologram grid;
/// kernels wrap around the grid edges like the periodic propagation does.
pub fn synthesize(cloud: &PointCloud, plan: &WrpPlan, lut: &PsfLut, opts: &SynthesisOptions) -> Result<ComplexField> {
    let needed = plan.slab_halfwidth();
    if !lut.covers(needed) {
        return Err(CghError::LutTooShallow {
            covered: lut.max_distance(),
            needed,
        });
    }
    let meta = FieldMetadata::new(
        opts.width,
        opts.height,
        lut.pitch,
        lut.wavelength,
        plan.scene_center_distance(),
        Geometry::InPlane,
        cloud.name.clone(),
    )?;
    let slabs = place_points(cloud, plan, lut, opts)?;
    let (w, h) = (opts.width, opts.height);
    let mut values = vec![Complex64::new(0.0, 0.0); w * h];
    let wrp_z = plan.wrp_z();
    for s in (0..plan.wrp_count()).rev() {
        if let Some(radius) = opts.occlusion_radius {
            for p in &slabs[s] {
                mask_disk(&mut values, w, h, p.row, p.col, radius);
            }
        }
        for p in &slabs[s] {
            stamp(&mut values, w, h, p, lut);
        }
        if s > 0 {
            asm_in_place(&mut values, w, h, (lut.pitch, lut.pitch), lut.wavelength, wrp_z[s] - wrp_z[s - 1]);
        }
    }
    let meta = meta.with_note(format!(
        "wrp synthesis: {} points, {} planes, last wrp z={:e}",
        cloud.len(),
        plan.wrp_count(),
        plan.last_wrp_z()
    ));
    Ok(ComplexField::new(meta, values)?)
}

/// Carries the last-WRP field to the hologram plane and removes the spherical
/// reference focused at the scene center.
///
/// `last_wrp_to_center` is the axial distance from the last WRP to the scene
/// center plane (negative when the WRP lies beyond the center), so the WRP
/// sits `viewing_distance - last_wrp_to_center` in front of the hologram.
pub fn to_fourier_hologram(wrp_field: &ComplexField, viewing_distance: f64, last_wrp_to_center: f64) -> Result<ComplexField> {
    if !(viewing_distance.is_finite() && viewing_distance > 0.0) {
        return Err(CghError::InvalidPlan(format!("viewing distance must be positive, got {viewing_distance}")));
    }
    let at_hologram = propagate_asm(wrp_field, viewing_distance - last_wrp_to_center)?;
    let demodulated = apply_fresnel(&at_hologram, viewing_distance, FresnelDirection::Demodulate)?;
    let (mut meta, values) = demodulated.into_parts();
    meta.geometry = Geometry::Fourier;
    meta.reference_distance = viewing_distance;
    Ok(ComplexField::new(meta, values)?)
}

/// [`synthesize`] followed by [`to_fourier_hologram`] at the plan's scene
/// center distance.
pub fn synthesize_hologram(cloud: &PointCloud, plan: &WrpPlan, lut: &PsfLut, opts: &SynthesisOptions) -> Result<ComplexField> {
    let wrp = synthesize(cloud, plan, lut, opts)?;
    let r = plan.scene_center_distance();
    to_fourier_hologram(&wrp, r, r - plan.last_wrp_z())
}

/// Object-plane pixel `(row, col)` where a scene-center point at lateral
/// `(x, y)` appears after [`fourier_reconstruct`](crate::propagation::fourier_reconstruct)
/// of a hologram with metadata `meta`.
pub fn object_pixel(meta: &FieldMetadata, x: f64, y: f64) -> (usize, usize) {
    let (px, py) = object_plane_pitch(meta);
    let mirror = |coord: f64, pitch: f64, n: usize| {
        let offset = (coord / pitch).round() as isize;
        ((n / 2) as isize - offset).rem_euclid(n as isize) as usize
    };
    (mirror(y, py, meta.height), mirror(x, px, meta.width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgh::{build_lut, Point};

    const LAMBDA: f64 = 532e-9;
    const PITCH: f64 = 3.45e-6;

    fn lut(halfwidth: f64, mode: PhaseMode) -> PsfLut {
        build_lut(LAMBDA, PITCH, halfwidth, 64, mode, 7).unwrap()
    }

    fn point(x: f64, y: f64, z: f64) -> Point {
        Point { x, y, z, amplitude: 1.0 }
    }

    #[test]
    fn empty_cloud_gives_zero_field() {
        let plan = WrpPlan::uniform(0.01, 0.011, 3, 0.0105).unwrap();
        let cloud = PointCloud::new(vec![], "empty").unwrap();
        let field = synthesize(&cloud, &plan, &lut(plan.slab_halfwidth(), PhaseMode::Random), &SynthesisOptions::new(32, 16)).unwrap();
        assert_eq!(field.energy(), 0.0);
        assert_eq!((field.width(), field.height()), (32, 16));
    }

    #[test]
    fn point_on_last_wrp_is_a_delta() {
        let plan = WrpPlan::uniform(0.01, 0.011, 3, 0.0105).unwrap();
        let z = plan.wrp_z()[0];
        let cloud = PointCloud::new(vec![point(3.0 * PITCH, -2.0 * PITCH, z)], "p").unwrap();
        let field = synthesize(&cloud, &plan, &lut(plan.slab_halfwidth(), PhaseMode::Deterministic), &SynthesisOptions::new(32, 32)).unwrap();
        for row in 0..32 {
            for col in 0..32 {
                let expected = if (row, col) == (14, 19) { 1.0 } else { 0.0 };
                assert!((field.get(row, col) - Complex64::new(expected, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn point_one_slab_behind_matches_two_step_oracle() {
        let plan = WrpPlan::uniform(0.010, 0.012, 2, 0.011).unwrap();
        let spacing = plan.wrp_z()[1] - plan.wrp_z()[0];
        let cloud = PointCloud::new(vec![point(0.0, 0.0, plan.wrp_z()[1])], "p").unwrap();
        let opts = SynthesisOptions::new(64, 64);
        let got = synthesize(&cloud, &plan, &lut(plan.slab_halfwidth(), PhaseMode::Deterministic), &opts).unwrap();

        let meta = got.meta().clone();
        let stamped = ComplexField::from_fn(meta, |r, c| {
            if (r, c) == (32, 32) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        })
        .unwrap();
        let oracle = propagate_asm(&stamped, spacing).unwrap();
        assert!(got.relative_l2(&oracle) < 1e-8);
    }

    #[test]
    fn linear_without_occlusion() {
        let plan = WrpPlan::uniform(0.0100, 0.0104, 4, 0.0102).unwrap();
        let lut = lut(plan.slab_halfwidth(), PhaseMode::Random);
        let a = PointCloud::new(vec![point(0.0, 0.0, 0.0100), point(5.0 * PITCH, 0.0, 0.01033)], "a").unwrap();
        let b = PointCloud::new(vec![point(-4.0 * PITCH, 3.0 * PITCH, 0.0104)], "b").unwrap();
        let opts = SynthesisOptions::new(64, 64).without_occlusion();
        // Random phases are drawn in cloud order, so B's phases must be drawn
        // after A's for the union to match the sum.
        let both = synthesize(&a.union(&b), &plan, &lut, &opts).unwrap();
        let sum_a = synthesize(&a, &plan, &lut, &opts).unwrap();
        let mut padded = a.clone();
        for p in &mut padded.points {
            p.amplitude = 0.0;
        }
        let sum_b = synthesize(&padded.union(&b), &plan, &lut, &opts).unwrap();
        let sum: Vec<_> = sum_a.values().iter().zip(sum_b.values()).map(|(x, y)| x + y).collect();
        let sum = ComplexField::new(both.meta().clone(), sum).unwrap();
        assert!(both.relative_l2(&sum) < 1e-10);
    }

    #[test]
    fn occlusion_masks_farther_contributions() {
        let plan = WrpPlan::uniform(0.0100, 0.0104, 2, 0.0102).unwrap();
        let lut = lut(plan.slab_halfwidth(), PhaseMode::Deterministic);
        let far = point(0.0, 0.0, plan.wrp_z()[1]);
        let near = Point { amplitude: 0.0, ..point(0.0, 0.0, plan.wrp_z()[0]) };
        let cloud = PointCloud::new(vec![far, near], "p").unwrap();
        let open = synthesize(&cloud, &plan, &lut, &SynthesisOptions::new(32, 32).without_occlusion()).unwrap();
        let masked = synthesize(&cloud, &plan, &lut, &SynthesisOptions::new(32, 32)).unwrap();
        assert!(open.get(16, 16).norm() > 0.0);
        assert_eq!(masked.get(16, 16).norm(), 0.0);
        assert_eq!(masked.get(16, 17).norm(), 0.0);
        assert_eq!(masked.get(14, 16), open.get(14, 16));
    }

    #[test]
    fn reports_every_point_outside_the_aperture() {
        let plan = WrpPlan::uniform(0.01, 0.011, 1, 0.0105).unwrap();
        let cloud = PointCloud::new(
            vec![point(0.0, 0.0, 0.0105), point(1.0, 0.0, 0.0105), point(0.0, 0.0, 0.0105), point(0.0, -20.0 * PITCH, 0.0105)],
            "p",
        )
        .unwrap();
        match synthesize(&cloud, &plan, &lut(plan.slab_halfwidth(), PhaseMode::Random), &SynthesisOptions::new(32, 32)) {
            Err(CghError::OutsideAperture { indices }) => assert_eq!(indices, vec![1, 3]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shallow_lut_is_rejected() {
        let plan = WrpPlan::uniform(0.01, 0.011, 1, 0.0105).unwrap();
        let cloud = PointCloud::new(vec![], "p").unwrap();
        let err = synthesize(&cloud, &plan, &lut(1e-5, PhaseMode::Random), &SynthesisOptions::new(8, 8)).unwrap_err();
        assert!(matches!(err, CghError::LutTooShallow { .. }));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let plan = WrpPlan::uniform(0.0100, 0.0104, 3, 0.0102).unwrap();
        let cloud = PointCloud::new(vec![point(0.0, 0.0, 0.0101), point(PITCH, 2.0 * PITCH, 0.0103)], "p").unwrap();
        let lut = lut(plan.slab_halfwidth(), PhaseMode::Random);
        let opts = SynthesisOptions::new(32, 32);
        let a = synthesize_hologram(&cloud, &plan, &lut, &opts).unwrap();
        let b = synthesize_hologram(&cloud, &plan, &lut, &opts).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn hologram_metadata() {
        let plan = WrpPlan::uniform(0.695, 0.705, 2, 0.7).unwrap();
        let cloud = PointCloud::new(vec![point(0.0, 0.0, 0.7)], "p").unwrap();
        let holo = synthesize_hologram(&cloud, &plan, &lut(plan.slab_halfwidth(), PhaseMode::Random), &SynthesisOptions::new(16, 16)).unwrap();
        assert_eq!(holo.meta().geometry, Geometry::Fourier);
        assert_eq!(holo.meta().reference_distance, 0.700);
        let wrp = ComplexField::zeros(holo.meta().clone()).unwrap();
        assert!(to_fourier_hologram(&wrp, 0.0, 0.0).is_err());
    }

    #[test]
    fn object_pixel_is_mirrored() {
        let meta = FieldMetadata::new(64, 64, PITCH, LAMBDA, 64.0 * PITCH * PITCH / LAMBDA, Geometry::Fourier, "m").unwrap();
        assert_eq!(object_pixel(&meta, 0.0, 0.0), (32, 32));
        assert_eq!(object_pixel(&meta, 5.0 * PITCH, -3.0 * PITCH), (35, 27));
    }
}
