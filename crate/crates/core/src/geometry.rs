//! Pinhole back-projection, rigid transforms and the world/grid mapping.
//!
//! World axes: `y` is up, `+x` is map east (increasing `px`) and `-z` is map
//! north (increasing `py`). Cameras look along `+z` with `+x` right and `+y`
//! down in the image.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid depth {0}")]
    InvalidDepth(f64),
    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    PixelOutOfBounds { u: u32, v: u32, width: u32, height: u32 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// Square-pixel camera with the given horizontal field of view, principal
    /// point at the image center.
    pub fn from_fov(width: u32, height: u32, hfov_deg: f64) -> Result<Self, GeometryError> {
        let f = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Self::new(f, f, (width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive and finite".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics("empty image".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(GeometryError::InvalidIntrinsics("principal point outside image".into()));
        }
        Ok(())
    }

    /// Camera-frame ray through pixel `(u, v)` scaled so that its `z` is 1.
    pub fn ray(&self, px: PixelCoord) -> [f64; 3] {
        [(px.u as f64 - self.cx) / self.fx, (px.v as f64 - self.cy) / self.fy, 1.0]
    }

    /// Pinhole projection of a camera-frame point; `None` behind the camera.
    pub fn project(&self, p: WorldPoint) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelCoord {
    pub u: u32,
    pub v: u32,
}

impl PixelCoord {
    pub fn new(u: u32, v: u32) -> Self {
        Self { u, v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Homogeneous world-from-camera transform, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose(pub [[f64; 4]; 4]);

impl Pose {
    pub const IDENTITY: Pose = Pose([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]);

    /// Validates orthonormality of the rotation block and the last row.
    pub fn new(m: [[f64; 4]; 4]) -> Result<Self, GeometryError> {
        let pose = Pose(m);
        pose.validate()?;
        Ok(pose)
    }

    pub fn from_row_major(values: &[f64; 16]) -> Result<Self, GeometryError> {
        let mut m = [[0.0; 4]; 4];
        for (i, v) in values.iter().enumerate() {
            m[i / 4][i % 4] = *v;
        }
        Self::new(m)
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for (i, v) in out.iter_mut().enumerate() {
            *v = self.0[i / 4][i % 4];
        }
        out
    }

    pub fn translation(x: f64, y: f64, z: f64) -> Self {
        let mut m = Self::IDENTITY.0;
        m[0][3] = x;
        m[1][3] = y;
        m[2][3] = z;
        Pose(m)
    }

    /// Rotation about the world up axis by `yaw_deg` (counter-clockwise seen
    /// from above, i.e. taking `+x` towards `-z`) followed by a translation.
    pub fn from_yaw(yaw_deg: f64, t: WorldPoint) -> Self {
        let (s, c) = yaw_deg.to_radians().sin_cos();
        Pose([
            [c, 0.0, s, t.x],
            [0.0, 1.0, 0.0, t.y],
            [-s, 0.0, c, t.z],
            [0.0, 0.0, 0.0, 1.0],
        ])
    }

    /// Camera at `position` facing compass `heading_deg` (0 = north = `-z`,
    /// 90 = east = `+x`), pitched down by `pitch_down_deg`.
    pub fn looking(position: WorldPoint, heading_deg: f64, pitch_down_deg: f64) -> Self {
        let (sh, ch) = heading_deg.to_radians().sin_cos();
        let (sp, cp) = pitch_down_deg.to_radians().sin_cos();
        let forward = [sh * cp, -sp, -ch * cp];
        let right = [ch, 0.0, sh];
        let down = cross(forward, right);
        Pose([
            [right[0], down[0], forward[0], position.x],
            [right[1], down[1], forward[1], position.y],
            [right[2], down[2], forward[2], position.z],
            [0.0, 0.0, 0.0, 1.0],
        ])
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let m = &self.0;
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidPose("non-finite entry".into()));
        }
        if m[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(GeometryError::InvalidPose("last row must be (0, 0, 0, 1)".into()));
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (dot - expected).abs() > 1e-6 {
                    return Err(GeometryError::InvalidPose("rotation block is not orthonormal".into()));
                }
            }
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if (det - 1.0).abs() > 1e-6 {
            return Err(GeometryError::InvalidPose(format!("rotation determinant {det}")));
        }
        Ok(())
    }

    pub fn position(&self) -> WorldPoint {
        WorldPoint::new(self.0[0][3], self.0[1][3], self.0[2][3])
    }

    /// Rotates a direction vector without translating it.
    pub fn rotate(&self, d: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * d[0] + m[0][1] * d[1] + m[0][2] * d[2],
            m[1][0] * d[0] + m[1][1] * d[1] + m[1][2] * d[2],
            m[2][0] * d[0] + m[2][1] * d[1] + m[2][2] * d[2],
        ]
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Top-down cell index. `px` runs along world `x` (east), `py` along world `-z`
/// (north).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCoord {
    pub px: usize,
    pub py: usize,
}

impl GridCoord {
    pub const fn new(px: usize, py: usize) -> Self {
        Self { px, py }
    }
}

/// Map extents and resolution: `rows` is H̄ (the `px` axis), `cols` is W̄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub scale: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(scale: f64, rows: usize, cols: usize) -> Result<Self, GeometryError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GeometryError::InvalidGrid(format!("scale must be positive, got {scale}")));
        }
        if rows == 0 || cols == 0 {
            return Err(GeometryError::InvalidGrid("empty grid".into()));
        }
        Ok(Self { scale, rows, cols })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, c: GridCoord) -> usize {
        c.px * self.cols + c.py
    }

    pub fn coord(&self, index: usize) -> GridCoord {
        GridCoord::new(index / self.cols, index % self.cols)
    }

    pub fn contains(&self, px: i64, py: i64) -> bool {
        px >= 0 && py >= 0 && (px as usize) < self.rows && (py as usize) < self.cols
    }

    /// Continuous cell coordinates of a world point; the cell is their floor.
    pub fn continuous(&self, p: &WorldPoint) -> (f64, f64) {
        (
            self.rows as f64 / 2.0 + p.x / self.scale + 0.5,
            self.cols as f64 / 2.0 - p.z / self.scale + 0.5,
        )
    }

    /// Top-down projection; `None` when the cell falls outside the map.
    pub fn project(&self, p: &WorldPoint) -> Option<GridCoord> {
        let (a, b) = self.continuous(p);
        let (px, py) = (a.floor(), b.floor());
        if !(px.is_finite() && py.is_finite()) {
            return None;
        }
        if px < 0.0 || py < 0.0 || px >= self.rows as f64 || py >= self.cols as f64 {
            return None;
        }
        Some(GridCoord::new(px as usize, py as usize))
    }

    /// World position of a cell center on the floor plane.
    pub fn cell_center(&self, c: GridCoord) -> WorldPoint {
        self.point_at(c.px as f64, c.py as f64)
    }

    /// World position of fractional cell coordinates (integers are centers).
    pub fn point_at(&self, px: f64, py: f64) -> WorldPoint {
        WorldPoint::new(
            (px - self.rows as f64 / 2.0) * self.scale,
            0.0,
            -(py - self.cols as f64 / 2.0) * self.scale,
        )
    }
}

/// Camera-frame point seen at pixel `px` with the given depth along `+z`.
pub fn back_project(px: PixelCoord, depth: f64, k: &Intrinsics) -> Result<WorldPoint, GeometryError> {
    if px.u >= k.width || px.v >= k.height {
        return Err(GeometryError::PixelOutOfBounds { u: px.u, v: px.v, width: k.width, height: k.height });
    }
    if !(depth.is_finite() && depth > 0.0) {
        return Err(GeometryError::InvalidDepth(depth));
    }
    let r = k.ray(px);
    Ok(WorldPoint::new(r[0] * depth, r[1] * depth, depth))
}

pub fn to_world(p: WorldPoint, pose: &Pose) -> WorldPoint {
    let m = &pose.0;
    WorldPoint::new(
        m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
        m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
        m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3],
    )
}

pub fn project_to_grid(p: &WorldPoint, grid: &GridSpec) -> Option<GridCoord> {
    grid.project(p)
}

pub fn grid_to_world(c: GridCoord, grid: &GridSpec) -> WorldPoint {
    grid.cell_center(c)
}

/// Wraps an angle in degrees into (-180, 180].
pub fn normalize_degrees(deg: f64) -> f64 {
    let mut d = deg % 360.0;
    if d <= -180.0 {
        d += 360.0;
    } else if d > 180.0 {
        d -= 360.0;
    }
    d
}

/// Compass bearing (0 = north/+py, 90 = east/+px) of the vector `(dpx, dpy)`.
pub fn bearing(dpx: f64, dpy: f64) -> f64 {
    normalize_degrees(dpx.atan2(dpy).to_degrees())
}

/// Unit step `(dpx, dpy)` for a compass heading.
pub fn heading_vector(heading_deg: f64) -> (f64, f64) {
    let (s, c) = heading_deg.to_radians().sin_cos();
    (s, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1000() -> GridSpec {
        GridSpec::new(0.05, 1000, 1000).unwrap()
    }

    #[test]
    fn principal_point_on_axis() {
        let k = Intrinsics::new(100.0, 100.0, 50.0, 40.0, 100, 80).unwrap();
        let p = back_project(PixelCoord::new(50, 40), 2.0, &k).unwrap();
        assert_eq!(p, WorldPoint::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn back_project_off_axis() {
        let k = Intrinsics::new(100.0, 100.0, 50.0, 50.0, 200, 100).unwrap();
        let p = back_project(PixelCoord::new(150, 50), 1.0, &k).unwrap();
        assert_eq!(p, WorldPoint::new(1.0, 0.0, 1.0));
    }

    #[test]
    fn invalid_depths_are_signalled() {
        let k = Intrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap();
        for d in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(back_project(PixelCoord::new(1, 1), d, &k), Err(GeometryError::InvalidDepth(_))));
        }
        assert!(back_project(PixelCoord::new(100, 1), 1.0, &k).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(Intrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 3.9, 0.0, 4, 4).is_ok());
    }

    #[test]
    fn identity_and_translation() {
        assert_eq!(to_world(WorldPoint::new(1.0, 2.0, 3.0), &Pose::IDENTITY), WorldPoint::new(1.0, 2.0, 3.0));
        let t = Pose::translation(0.0, 0.0, 5.0);
        assert_eq!(to_world(WorldPoint::default(), &t), WorldPoint::new(0.0, 0.0, 5.0));
    }

    #[test]
    fn pose_validation_rejects_shear_and_reflection() {
        let mut m = Pose::IDENTITY.0;
        m[0][1] = 0.1;
        assert!(Pose::new(m).is_err());
        let mut m = Pose::IDENTITY.0;
        m[0][0] = -1.0;
        assert!(Pose::new(m).is_err());
        let mut m = Pose::IDENTITY.0;
        m[3][0] = 1.0;
        assert!(Pose::new(m).is_err());
    }

    #[test]
    fn looking_pose_is_rigid_and_faces_heading() {
        for heading in [0.0, 37.0, 90.0, -135.0, 180.0] {
            let pose = Pose::looking(WorldPoint::new(1.0, 1.5, -2.0), heading, 25.0);
            pose.validate().unwrap();
            let fwd = pose.rotate([0.0, 0.0, 1.0]);
            // horizontal component points along the compass heading
            let b = bearing(fwd[0], -fwd[2]);
            assert!((normalize_degrees(b - heading)).abs() < 1e-9, "{heading} -> {b}");
            assert!(fwd[1] < 0.0);
        }
    }

    #[test]
    fn eq1_examples() {
        let g = grid1000();
        assert_eq!(g.project(&WorldPoint::new(0.0, 3.0, 0.0)), Some(GridCoord::new(500, 500)));
        assert_eq!(g.project(&WorldPoint::new(1.3, 0.0, -0.7)), Some(GridCoord::new(526, 514)));
        assert_eq!(g.project(&WorldPoint::new(40.0, 0.0, 0.0)), None);
        assert_eq!(g.project(&WorldPoint::new(-25.0, 0.0, 0.0)), Some(GridCoord::new(0, 500)));
        assert_eq!(g.project(&WorldPoint::new(-25.1, 0.0, 0.0)), None);
    }

    #[test]
    fn cell_center_inverse() {
        let g = grid1000();
        assert_eq!(g.cell_center(GridCoord::new(500, 500)), WorldPoint::new(0.0, 0.0, 0.0));
        let p = g.cell_center(GridCoord::new(526, 514));
        assert!((p.x - 1.3).abs() < 1e-12 && (p.z + 0.7).abs() < 1e-12 && p.y == 0.0);
        assert_eq!(g.project(&p), Some(GridCoord::new(526, 514)));
    }

    #[test]
    fn angles() {
        assert_eq!(normalize_degrees(180.0), 180.0);
        assert_eq!(normalize_degrees(-180.0), 180.0);
        assert_eq!(normalize_degrees(270.0), -90.0);
        assert_eq!(normalize_degrees(-450.0), -90.0);
        assert_eq!(bearing(0.0, 1.0), 0.0);
        assert_eq!(bearing(1.0, 0.0), 90.0);
        assert_eq!(bearing(-1.0, 0.0), -90.0);
        assert_eq!(bearing(0.0, -1.0), 180.0);
    }
}
