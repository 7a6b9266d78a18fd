use super::{CghError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    /// Lateral position in meters, relative to the optical axis.
    pub x: f64,
    pub y: f64,
    /// Distance from the hologram plane in meters.
    pub z: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub name: String,
}

impl PointCloud {
    pub fn new(points: Vec<Point>, name: impl Into<String>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(CghError::InvalidPoint { index: i, reason: "non-finite coordinate" });
            }
            if !(p.amplitude.is_finite() && p.amplitude >= 0.0) {
                return Err(CghError::InvalidPoint { index: i, reason: "amplitude must be finite and non-negative" });
            }
        }
        Ok(PointCloud { points, name: name.into() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(min z, max z)`, or `None` for an empty cloud.
    pub fn depth_range(&self) -> Option<(f64, f64)> {
        self.points.iter().fold(None, |acc, p| match acc {
            None => Some((p.z, p.z)),
            Some((lo, hi)) => Some((lo.min(p.z), hi.max(p.z))),
        })
    }

    pub fn union(&self, other: &PointCloud) -> PointCloud {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        PointCloud { points, name: format!("{}+{}", self.name, other.name) }
    }

    /// Parses ASCII point data: either bare `x y z [amplitude]` lines or an
    /// ASCII PLY file whose vertex element has `x`, `y`, `z` and optionally
    /// an `amplitude` or `intensity` property.
    pub fn parse(text: &str, name: impl Into<String>) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        let is_ply = matches!(lines.peek(), Some((_, l)) if l.trim() == "ply");
        let points = if is_ply { parse_ply(lines)? } else { parse_xyz(lines)? };
        Self::new(points, name)
    }
}

fn number(token: &str, line: usize) -> Result<f64> {
    token.parse::<f64>().map_err(|_| CghError::Parse {
        line,
        reason: format!("`{token}` is not a number"),
    })
}

fn parse_xyz<'a>(lines: impl Iterator<Item = (usize, &'a str)>) -> Result<Vec<Point>> {
    let mut points = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
        if !(3..=4).contains(&cols.len()) {
            return Err(CghError::Parse {
                line: i + 1,
                reason: format!("expected `x y z [amplitude]`, found {} columns", cols.len()),
            });
        }
        let amplitude = cols.get(3).map(|t| number(t, i + 1)).transpose()?.unwrap_or(1.0);
        points.push(Point {
            x: number(cols[0], i + 1)?,
            y: number(cols[1], i + 1)?,
            z: number(cols[2], i + 1)?,
            amplitude,
        });
    }
    Ok(points)
}

fn parse_ply<'a>(mut lines: impl Iterator<Item = (usize, &'a str)>) -> Result<Vec<Point>> {
    let bad = |line: usize, reason: &str| CghError::Parse { line, reason: reason.to_string() };
    lines.next();
    let mut vertex_count: Option<usize> = None;
    let mut in_vertex = false;
    let mut properties: Vec<String> = Vec::new();
    let mut last_line = 1;
    loop {
        let Some((i, raw)) = lines.next() else {
            return Err(bad(last_line, "PLY header is not terminated by end_header"));
        };
        last_line = i + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", ..] => {}
            ["format", ..] => return Err(bad(i + 1, "only ASCII PLY is supported")),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", "vertex", count] => {
                vertex_count = Some(count.parse().map_err(|_| bad(i + 1, "bad vertex count"))?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", "list", ..] if in_vertex => return Err(bad(i + 1, "list properties on vertices are not supported")),
            ["property", _ty, name] if in_vertex => properties.push(name.to_string()),
            ["property", ..] => {}
            ["end_header"] => break,
            _ => return Err(bad(i + 1, "unrecognized PLY header line")),
        }
    }
    let count = vertex_count.ok_or_else(|| bad(last_line, "PLY has no vertex element"))?;
    let find = |names: &[&str]| properties.iter().position(|p| names.contains(&p.as_str()));
    let (Some(ix), Some(iy), Some(iz)) = (find(&["x"]), find(&["y"]), find(&["z"])) else {
        return Err(bad(last_line, "vertex element lacks x/y/z properties"));
    };
    let iamp = find(&["amplitude", "intensity"]);

    let mut points = Vec::new();
    for (i, raw) in lines {
        if points.len() == count {
            break;
        }
        let cols: Vec<&str> = raw.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        if cols.len() != properties.len() {
            return Err(bad(i + 1, "vertex line does not match the declared properties"));
        }
        points.push(Point {
            x: number(cols[ix], i + 1)?,
            y: number(cols[iy], i + 1)?,
            z: number(cols[iz], i + 1)?,
            amplitude: iamp.map(|a| number(cols[a], i + 1)).transpose()?.unwrap_or(1.0),
        });
    }
    if points.len() != count {
        return Err(bad(last_line, "fewer vertices than declared"));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xyz_with_optional_amplitude() {
        let cloud = PointCloud::parse("# toy\n0 0 0.7\n1e-4, -1e-4, 0.701, 0.5\n\n", "toy").unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.points[0].amplitude, 1.0);
        assert_eq!(cloud.points[1].amplitude, 0.5);
        assert_eq!(cloud.depth_range(), Some((0.7, 0.701)));
    }

    #[test]
    fn ascii_ply() {
        let text = "ply\nformat ascii 1.0\ncomment x\nelement vertex 2\nproperty float x\n\
                    property float y\nproperty float z\nproperty float intensity\nelement face 0\n\
                    property list uchar int vertex_indices\nend_header\n0 0 1 0.25\n1 2 3 1\n";
        let cloud = PointCloud::parse(text, "p").unwrap();
        assert_eq!(cloud.points[1], Point { x: 1.0, y: 2.0, z: 3.0, amplitude: 1.0 });
        assert_eq!(cloud.points[0].amplitude, 0.25);
    }

    #[test]
    fn rejects_malformed_points() {
        assert!(matches!(PointCloud::parse("1 2\n", "x"), Err(CghError::Parse { line: 1, .. })));
        assert!(matches!(PointCloud::parse("1 2 3 -1\n", "x"), Err(CghError::InvalidPoint { index: 0, .. })));
        assert!(PointCloud::parse("1 2 nan\n", "x").is_err());
        assert!(PointCloud::parse("ply\nformat binary_little_endian 1.0\nend_header\n", "x").is_err());
        assert!(PointCloud::parse("ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n", "x").is_err());
    }

    #[test]
    fn empty_cloud_is_valid() {
        let cloud = PointCloud::parse("", "empty").unwrap();
        assert!(cloud.is_empty());
        assert_eq!(cloud.depth_range(), None);
    }
}
