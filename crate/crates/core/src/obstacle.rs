//! Embodiment-specific obstacle maps: the union of the masks of a profile's
//! blocking categories, intersected with the map's occupancy layer.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingError, EmbeddingProvider, LabelSet};
use crate::index::{segment, IndexError, Mask, SegmentationResult};
use crate::map::VLMap;

#[derive(Debug, Error)]
pub enum ObstacleError {
    #[error("profile {profile}: {reason}")]
    Profile { profile: String, reason: String },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// What blocks a given robot. Blocking categories are stored by name and
/// resolved against the potential list when a map is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbodimentProfile {
    pub name: String,
    pub potential_obstacles: Vec<String>,
    pub blocking: Vec<String>,
    /// Robot radius in meters, used for inflation.
    pub robot_radius: f64,
}

impl EmbodimentProfile {
    pub fn new(
        name: impl Into<String>,
        potential: &[&str],
        blocking: &[&str],
        robot_radius: f64,
    ) -> Result<Self, ObstacleError> {
        let p = Self {
            name: name.into(),
            potential_obstacles: potential.iter().map(|s| s.to_string()).collect(),
            blocking: blocking.iter().map(|s| s.to_string()).collect(),
            robot_radius,
        };
        p.validate()?;
        Ok(p)
    }

    /// Ground robot obstacle list.
    pub fn locobot() -> Self {
        Self::new(
            "locobot",
            &["chair", "wall", "wall above the door", "table", "window", "floor", "stairs", "other"],
            &["wall", "chair", "table", "window", "stairs", "other"],
            0.18,
        )
        .expect("built-in profile is valid")
    }

    /// Drone obstacle list: furniture below flight height is not blocking.
    pub fn drone() -> Self {
        Self::new(
            "drone",
            &[
                "chair",
                "sofa",
                "wall",
                "table",
                "counter",
                "window",
                "floor",
                "stairs",
                "ceiling lights",
                "cabinet",
                "counter support",
                "other",
            ],
            &["wall", "window", "stairs", "ceiling lights", "cabinet", "other"],
            0.15,
        )
        .expect("built-in profile is valid")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "locobot" => Some(Self::locobot()),
            "drone" => Some(Self::drone()),
            _ => None,
        }
    }

    fn err(&self, reason: impl Into<String>) -> ObstacleError {
        ObstacleError::Profile { profile: self.name.clone(), reason: reason.into() }
    }

    pub fn validate(&self) -> Result<(), ObstacleError> {
        LabelSet::new(&self.potential_obstacles).map_err(|e| self.err(e.to_string()))?;
        if self.blocking.is_empty() {
            return Err(self.err("blocking list is empty"));
        }
        self.blocking_indices()?;
        if !(self.robot_radius.is_finite() && self.robot_radius >= 0.0) {
            return Err(self.err(format!("robot radius must be non-negative, got {}", self.robot_radius)));
        }
        Ok(())
    }

    pub fn labels(&self) -> Result<LabelSet, ObstacleError> {
        LabelSet::new(&self.potential_obstacles).map_err(|e| self.err(e.to_string()))
    }

    /// Positions of the blocking categories in the potential list.
    pub fn blocking_indices(&self) -> Result<Vec<usize>, ObstacleError> {
        let mut out = Vec::with_capacity(self.blocking.len());
        for b in &self.blocking {
            let i = self
                .potential_obstacles
                .iter()
                .position(|p| p == b)
                .ok_or_else(|| self.err(format!("blocking category {b:?} is not in the potential list")))?;
            if out.contains(&i) {
                return Err(self.err(format!("blocking category {b:?} is listed twice")));
            }
            out.push(i);
        }
        Ok(out)
    }

    /// Inflation radius in cells for a map of the given scale.
    pub fn inflation_cells(&self, scale: f64) -> usize {
        (self.robot_radius / scale - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleMap {
    pub blocked: Mask,
    pub profile: String,
    pub map_id: String,
}

/// Blocked where the joint segmentation picks a blocking category and the
/// occupancy layer is set.
pub fn obstacles_from_segmentation(
    seg: &SegmentationResult,
    occupancy: &[bool],
    blocking: &[usize],
) -> Mask {
    let mut is_blocking = vec![false; seg.num_labels];
    for &b in blocking {
        is_blocking[b] = true;
    }
    Mask {
        rows: seg.rows,
        cols: seg.cols,
        data: seg
            .labels
            .iter()
            .zip(occupancy)
            .map(|(&l, &occ)| occ && (l as usize) < is_blocking.len() && is_blocking[l as usize])
            .collect(),
    }
}

pub fn build_obstacle_map(
    map: &VLMap,
    profile: &EmbodimentProfile,
    provider: &dyn EmbeddingProvider,
) -> Result<ObstacleMap, ObstacleError> {
    let labels = profile.labels()?;
    let blocking = profile.blocking_indices()?;
    let e = provider.embed_labels(&labels)?;
    let seg = segment(map, &e)?;
    Ok(ObstacleMap {
        blocked: obstacles_from_segmentation(&seg, map.occupancy(), &blocking),
        profile: profile.name.clone(),
        map_id: map.content_id(),
    })
}

/// Dilation by a Euclidean disk of `radius` cells.
pub fn inflate(mask: &Mask, radius: usize) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    let r = radius as i64;
    // half-width of the disk at each row offset
    let spans: Vec<i64> = (-r..=r).map(|dx| ((r * r - dx * dx) as f64).sqrt().floor() as i64).collect();
    let (rows, cols) = (mask.rows as i64, mask.cols as i64);
    let mut out = Mask::new(mask.rows, mask.cols);
    for x in 0..rows {
        for y in 0..cols {
            if !mask.data[(x * cols + y) as usize] {
                continue;
            }
            for (k, dx) in (-r..=r).enumerate() {
                let nx = x + dx;
                if nx < 0 || nx >= rows {
                    continue;
                }
                let h = spans[k];
                let (lo, hi) = ((y - h).max(0), (y + h).min(cols - 1));
                let row = (nx * cols) as usize;
                out.data[row + lo as usize..=row + hi as usize].fill(true);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstacleSidecar {
    pub profile: String,
    pub map_id: String,
    pub rows: usize,
    pub cols: usize,
    pub inflation_cells: usize,
    pub blocked_cells: usize,
}

/// Binary PGM (P5): 0 = blocked, 255 = free. Image rows follow `px`.
pub fn write_pgm(path: &Path, mask: &Mask) -> io::Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", mask.cols, mask.rows).into_bytes();
    out.extend(mask.data.iter().map(|&b| if b { 0u8 } else { 255u8 }));
    fs::write(path, out)
}

pub fn read_pgm(path: &Path) -> io::Result<Mask> {
    let bytes = fs::read(path)?;
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(bad("truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    i += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("expected an 8-bit P5 image"));
    }
    let cols: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
    let rows: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
    let data = bytes.get(i..i + rows * cols).ok_or_else(|| bad("truncated PGM data"))?;
    Ok(Mask { rows, cols, data: data.iter().map(|&v| v < 128).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridCoord;

    #[test]
    fn builtin_profiles_are_valid() {
        let l = EmbodimentProfile::locobot();
        let d = EmbodimentProfile::drone();
        assert!(l.blocking.contains(&"table".to_string()));
        assert!(!d.blocking.contains(&"table".to_string()));
        assert!(!l.blocking.contains(&"floor".to_string()));
        assert_eq!(l.inflation_cells(0.05), 4);
        assert_eq!(d.inflation_cells(0.05), 3);
    }

    #[test]
    fn profile_validation() {
        assert!(EmbodimentProfile::new("x", &["floor", "wall"], &[], 0.1).is_err());
        assert!(EmbodimentProfile::new("x", &["floor", "wall"], &["door"], 0.1).is_err());
        assert!(EmbodimentProfile::new("x", &["floor", "floor"], &["floor"], 0.1).is_err());
        assert!(EmbodimentProfile::new("x", &["floor", "wall"], &["wall"], -1.0).is_err());
    }

    #[test]
    fn inflate_radius_one_is_a_plus() {
        let mut m = Mask::new(5, 5);
        m.set(GridCoord::new(2, 2), true);
        let out = inflate(&m, 1);
        let expect: Vec<_> = [(1, 2), (2, 1), (2, 2), (2, 3), (3, 2)].iter().map(|&(x, y)| GridCoord::new(x, y)).collect();
        assert_eq!(out.cells().collect::<Vec<_>>(), expect);
        assert_eq!(inflate(&m, 0), m);
    }

    #[test]
    fn table_blocks_ground_robot_only() {
        let l = EmbodimentProfile::locobot();
        let d = EmbodimentProfile::drone();
        let seg_for = |p: &EmbodimentProfile, label: &str| SegmentationResult {
            rows: 1,
            cols: 2,
            num_labels: p.potential_obstacles.len(),
            labels: vec![p.labels().unwrap().index_of(label).unwrap() as u32; 2],
            scores: vec![1.0; 2],
        };
        let occ = [true, false];
        let ground = obstacles_from_segmentation(&seg_for(&l, "table"), &occ, &l.blocking_indices().unwrap());
        let drone = obstacles_from_segmentation(&seg_for(&d, "table"), &occ, &d.blocking_indices().unwrap());
        assert_eq!(ground.data, vec![true, false]);
        assert_eq!(drone.data, vec![false, false]);
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Mask::from_fn(3, 4, |c| (c.px + c.py) % 3 == 0);
        let p = dir.path().join("o.pgm");
        write_pgm(&p, &m).unwrap();
        assert_eq!(read_pgm(&p).unwrap(), m);
    }
}
