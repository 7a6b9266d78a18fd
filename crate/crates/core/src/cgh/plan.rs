use super::{CghError, PointCloud, Result};

/// Placement of the wavefront recording planes.
///
/// The depth interval is split into equal slabs with one WRP at the center
/// of each. Depths are distances from the hologram plane, so `wrp_z[0]` is
/// the plane nearest to the hologram.
#[derive(Debug, Clone, PartialEq)]
pub struct WrpPlan {
    wrp_z: Vec<f64>,
    slab_bounds: Vec<(f64, f64)>,
    scene_center_distance: f64,
}

impl WrpPlan {
    pub fn uniform(z_near: f64, z_far: f64, wrp_count: usize, scene_center_distance: f64) -> Result<Self> {
        if wrp_count == 0 {
            return Err(CghError::InvalidPlan("wrp_count must be at least 1".into()));
        }
        if !(z_near.is_finite() && z_far.is_finite() && z_near <= z_far) {
            return Err(CghError::InvalidPlan(format!("invalid depth interval [{z_near}, {z_far}]")));
        }
        if !(scene_center_distance.is_finite() && scene_center_distance > 0.0) {
            return Err(CghError::InvalidPlan("scene center distance must be positive".into()));
        }
        if z_near == z_far && wrp_count > 1 {
            return Err(CghError::InvalidPlan(
                "a zero-depth interval supports exactly one WRP".into(),
            ));
        }
        let width = (z_far - z_near) / wrp_count as f64;
        let slab_bounds: Vec<(f64, f64)> = (0..wrp_count)
            .map(|i| {
                let lo = z_near + width * i as f64;
                let hi = if i + 1 == wrp_count { z_far } else { z_near + width * (i + 1) as f64 };
                (lo, hi)
            })
            .collect();
        let wrp_z = slab_bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        Ok(WrpPlan {
            wrp_z,
            slab_bounds,
            scene_center_distance,
        })
    }

    /// Uniform plan spanning the cloud's depth extent.
    pub fn for_cloud(cloud: &PointCloud, wrp_count: usize, scene_center_distance: f64) -> Result<Self> {
        let (lo, hi) = cloud
            .depth_range()
            .ok_or_else(|| CghError::InvalidPlan("cannot derive a plan from an empty cloud".into()))?;
        let count = if lo == hi { 1 } else { wrp_count };
        Self::uniform(lo, hi, count, scene_center_distance)
    }

    pub fn wrp_count(&self) -> usize {
        self.wrp_z.len()
    }

    pub fn wrp_z(&self) -> &[f64] {
        &self.wrp_z
    }

    pub fn slab_bounds(&self) -> &[(f64, f64)] {
        &self.slab_bounds
    }

    pub fn scene_center_distance(&self) -> f64 {
        self.scene_center_distance
    }

    /// Depth of the WRP nearest to the hologram.
    pub fn last_wrp_z(&self) -> f64 {
        self.wrp_z[0]
    }

    /// Half the slab thickness: the largest point-to-WRP distance.
    pub fn slab_halfwidth(&self) -> f64 {
        self.slab_bounds
            .iter()
            .map(|(lo, hi)| 0.5 * (hi - lo))
            .fold(0.0, f64::max)
    }

    /// Index of the slab containing depth `z`. Slabs are half-open except the
    /// last one, which also owns its far bound.
    pub fn slab_of(&self, z: f64) -> Option<usize> {
        let (first, last) = (self.slab_bounds[0].0, self.slab_bounds[self.slab_bounds.len() - 1].1);
        if !(z >= first && z <= last) {
            return None;
        }
        let idx = self.slab_bounds.partition_point(|&(_, hi)| hi <= z);
        Some(idx.min(self.slab_bounds.len() - 1))
    }
}
