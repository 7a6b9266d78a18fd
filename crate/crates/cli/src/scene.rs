//! Point clouds from the `[scene]` section.

use holoqa_core::cgh::{Point, PointCloud};
use std::f64::consts::PI;

use crate::config::{SceneConfig, SceneSource};
use crate::{io_err, Result};

/// Builds the cloud with depths measured from the hologram plane, the scene
/// center placed `center_distance` away.
pub fn build_cloud(scene: &SceneConfig, center_distance: f64) -> Result<PointCloud> {
    let local = match &scene.source {
        SceneSource::File { path } => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            PointCloud::parse(&text, &scene.name)?.points
        }
        SceneSource::Points { points } => points
            .iter()
            .map(|p| Point { x: p[0], y: p[1], z: p[2], amplitude: p.get(3).copied().unwrap_or(1.0) })
            .collect(),
        SceneSource::Sphere { radius, count } => fibonacci_sphere(*radius, *count),
        SceneSource::Plane { width, height, columns, rows, tilt_deg } => {
            tilted_plane(*width, *height, *columns, *rows, *tilt_deg)
        }
    };
    let points = local.into_iter().map(|p| Point { z: p.z + center_distance, ..p }).collect();
    Ok(PointCloud::new(points, &scene.name)?)
}

/// Evenly spread points on a sphere centered at the origin.
pub fn fibonacci_sphere(radius: f64, count: usize) -> Vec<Point> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - y * y).sqrt();
            let theta = golden * i as f64;
            Point { x: radius * r * theta.cos(), y: radius * y, z: radius * r * theta.sin(), amplitude: 1.0 }
        })
        .collect()
}

/// Grid of `columns x rows` points; positive tilt moves the right edge away
/// from the viewer.
pub fn tilted_plane(width: f64, height: f64, columns: usize, rows: usize, tilt_deg: f64) -> Vec<Point> {
    let coord = |i: usize, n: usize, extent: f64| if n == 1 { 0.0 } else { extent * (i as f64 / (n - 1) as f64 - 0.5) };
    let slope = tilt_deg.to_radians().tan();
    (0..rows)
        .flat_map(|r| {
            (0..columns).map(move |c| {
                let x = coord(c, columns, width);
                Point { x, y: coord(r, rows, height), z: x * slope, amplitude: 1.0 }
            })
        })
        .collect()
}

/// Axial extent of the cloud.
pub fn depth(cloud: &PointCloud) -> f64 {
    cloud.depth_range().map_or(0.0, |(lo, hi)| hi - lo)
}
