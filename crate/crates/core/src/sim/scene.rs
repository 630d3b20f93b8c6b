use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::embedding::LabelSet;
use crate::geometry::{GridCoord, GridSpec};
use crate::index::{find_components, LandmarkComponent, Mask, SegmentationResult};
use crate::obstacle::inflate;

pub const SCENE_VERSION: u32 = 1;

/// Categories the apartment generator draws from, in label-index order.
pub const APARTMENT_LABELS: &[&str] = &[
    "floor",
    "wall",
    "window",
    "table",
    "chair",
    "sofa",
    "bed",
    "counter",
    "sink",
    "oven",
    "refrigerator",
    "cabinet",
    "television",
    "toilet",
    "bookshelf",
    "laptop",
    "plant",
];

/// Furniture footprint (meters along px, py) and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Furniture {
    pub size: (f64, f64),
    pub height: f32,
}

pub const WALL_HEIGHT: f32 = 2.5;
pub const LAPTOP_HEIGHT: f32 = 0.72;

pub fn furniture(label: &str) -> Option<Furniture> {
    let (w, d, h) = match label {
        "table" => (1.2, 0.8, 0.7),
        "chair" => (0.5, 0.5, 0.9),
        "sofa" => (1.8, 0.9, 0.8),
        "bed" => (2.0, 1.6, 0.6),
        "counter" => (1.6, 0.6, 0.9),
        "sink" => (0.6, 0.5, 0.9),
        "oven" => (0.6, 0.6, 0.9),
        "refrigerator" => (0.7, 0.7, 1.8),
        "cabinet" => (0.8, 0.5, 1.9),
        "television" => (1.0, 0.3, 1.2),
        "toilet" => (0.5, 0.7, 0.45),
        "bookshelf" => (0.9, 0.35, 1.8),
        "plant" => (0.4, 0.4, 1.0),
        _ => return None,
    };
    Some(Furniture { size: (w, d), height: h })
}

/// Ground-truth world: a label and a height per cell. Floor cells have
/// height 0, everything else is a solid column from the floor up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    pub scale: f32,
    pub rows: usize,
    pub cols: usize,
    pub labels: Vec<String>,
    pub label_grid: Vec<u32>,
    pub heights: Vec<f32>,
}

impl Scene {
    /// Empty floor surrounded by nothing; `labels[0]` must be the floor.
    pub fn empty(name: &str, scale: f32, rows: usize, cols: usize, labels: &[&str]) -> Self {
        Self {
            version: SCENE_VERSION,
            name: name.into(),
            seed: 0,
            scale,
            rows,
            cols,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            label_grid: vec![0; rows * cols],
            heights: vec![0.0; rows * cols],
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec { scale: self.scale as f64, rows: self.rows, cols: self.cols }
    }

    pub fn label_set(&self) -> LabelSet {
        LabelSet::new(&self.labels).expect("scene labels are validated")
    }

    pub fn label_index(&self, name: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == name).map(|i| i as u32)
    }

    pub fn label_at(&self, c: GridCoord) -> u32 {
        self.label_grid[c.px * self.cols + c.py]
    }

    pub fn height_at(&self, c: GridCoord) -> f32 {
        self.heights[c.px * self.cols + c.py]
    }

    /// Label and height of cell `(px, py)`, or `None` outside the scene.
    pub fn cell(&self, px: i64, py: i64) -> Option<(u32, f32)> {
        self.grid().contains(px, py).then(|| {
            let i = px as usize * self.cols + py as usize;
            (self.label_grid[i], self.heights[i])
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| SimError::Scene(format!("{}: {m}", self.name));
        if self.version != SCENE_VERSION {
            return Err(bad(format!("unsupported scene version {}", self.version)));
        }
        GridSpec::new(self.scale as f64, self.rows, self.cols).map_err(|e| bad(e.to_string()))?;
        LabelSet::new(&self.labels).map_err(|e| bad(e.to_string()))?;
        if self.labels[0] != "floor" {
            return Err(bad("label 0 must be \"floor\"".into()));
        }
        let n = self.rows * self.cols;
        if self.label_grid.len() != n || self.heights.len() != n {
            return Err(bad("grid sizes do not match rows x cols".into()));
        }
        for (i, (&l, &h)) in self.label_grid.iter().zip(&self.heights).enumerate() {
            if l as usize >= self.labels.len() {
                return Err(bad(format!("cell {i} has label {l} outside the label list")));
            }
            if !h.is_finite() || (l == 0) != (h == 0.0) || h < 0.0 {
                return Err(bad(format!("cell {i}: floor cells need height 0 and others a positive height")));
            }
        }
        Ok(())
    }

    pub fn fill(&mut self, min: (usize, usize), max: (usize, usize), label: u32, height: f32) {
        for px in min.0..=max.0.min(self.rows - 1) {
            for py in min.1..=max.1.min(self.cols - 1) {
                let i = px * self.cols + py;
                self.label_grid[i] = label;
                self.heights[i] = height;
            }
        }
    }

    /// Cells a body cannot enter: anything at least `clearance` meters tall.
    pub fn blocked(&self, clearance: f32) -> Mask {
        Mask { rows: self.rows, cols: self.cols, data: self.heights.iter().map(|&h| h >= clearance).collect() }
    }

    pub fn label_mask(&self, label: u32) -> Mask {
        Mask { rows: self.rows, cols: self.cols, data: self.label_grid.iter().map(|&l| l == label).collect() }
    }

    /// Instances of every non-floor category present.
    pub fn inventory(&self) -> BTreeMap<String, Vec<LandmarkComponent>> {
        let mut out = BTreeMap::new();
        for (i, name) in self.labels.iter().enumerate().skip(1) {
            let mut comps = find_components(&self.label_mask(i as u32));
            if comps.is_empty() {
                continue;
            }
            comps.iter_mut().for_each(|c| c.label = Some(i));
            out.insert(name.clone(), comps);
        }
        out
    }

    /// The label grid as a fully observed segmentation.
    pub fn segmentation(&self) -> SegmentationResult {
        SegmentationResult {
            rows: self.rows,
            cols: self.cols,
            num_labels: self.labels.len(),
            labels: self.label_grid.clone(),
            scores: vec![1.0; self.label_grid.len()],
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        let json = serde_json::to_string(self).map_err(|e| SimError::Format(e.to_string()))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let s: Scene = serde_json::from_slice(&fs::read(path)?).map_err(|e| SimError::Format(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }
}

/// Procedural apartment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApartmentParams {
    pub size: usize,
    pub scale: f32,
    /// Categories that may be placed as furniture.
    pub furniture: Vec<String>,
    pub items_per_room: (usize, usize),
    /// Probability that a placed table carries a laptop.
    pub laptop_chance: f64,
    pub windows: bool,
    /// Free gap kept around furniture, meters.
    pub clearance: f64,
    /// Radius of the widest body that must reach every free area, meters.
    pub body_radius: f64,
}

impl Default for ApartmentParams {
    fn default() -> Self {
        Self {
            size: 160,
            scale: 0.05,
            furniture: APARTMENT_LABELS[3..15].iter().map(|s| s.to_string()).collect(),
            items_per_room: (2, 4),
            laptop_chance: 0.5,
            windows: true,
            clearance: 0.6,
            body_radius: 0.18,
        }
    }
}

impl ApartmentParams {
    /// Only categories that both built-in obstacle lists know, with many
    /// tables and chairs that a flying body can pass over.
    pub fn open_plan() -> Self {
        Self {
            furniture: vec!["table".into(), "chair".into(), "table".into()],
            items_per_room: (3, 5),
            laptop_chance: 0.0,
            ..Self::default()
        }
    }
}

fn free_connected(scene: &Scene, radius_cells: usize) -> bool {
    let blocked = inflate(&scene.blocked(0.2), radius_cells);
    let free: Vec<usize> = (0..blocked.data.len()).filter(|&i| !blocked.data[i]).collect();
    let Some(&start) = free.first() else { return false };
    let mut seen = vec![false; blocked.data.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    let cols = scene.cols;
    while let Some(i) = stack.pop() {
        count += 1;
        let (x, y) = ((i / cols) as i64, (i % cols) as i64);
        for (dx, dy) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            if !blocked.get_signed(x + dx, y + dy) && scene.grid().contains(x + dx, y + dy) {
                let j = (x + dx) as usize * cols + (y + dy) as usize;
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count == free.len()
}

/// A seeded apartment: outer walls, two interior walls splitting four rooms
/// joined by doors, and furniture that never cuts the free space apart.
pub fn generate_apartment(seed: u64, params: &ApartmentParams) -> Result<Scene, SimError> {
    let mut labels: Vec<&str> = APARTMENT_LABELS.to_vec();
    for f in &params.furniture {
        if furniture(f).is_none() {
            return Err(SimError::Scene(format!("no furniture model for {f:?}")));
        }
        if !labels.contains(&f.as_str()) {
            labels.push(f);
        }
    }
    let n = params.size;
    let s = params.scale as f64;
    let cells = |m: f64| (m / s).round() as usize;
    let wall = cells(0.15).max(1);
    let door = cells(1.0).max(1);
    if n < 2 * wall + 4 * door {
        return Err(SimError::Scene(format!("apartment of {n} cells is too small")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = Scene::empty(&format!("apartment-{seed}"), params.scale, n, n, &labels);
    scene.seed = seed;
    let id = |name: &str| labels.iter().position(|l| *l == name).unwrap() as u32;
    let (wall_id, window_id) = (id("wall"), id("window"));
    let last = n - 1;
    scene.fill((0, 0), (last, wall - 1), wall_id, WALL_HEIGHT);
    scene.fill((0, n - wall), (last, last), wall_id, WALL_HEIGHT);
    scene.fill((0, 0), (wall - 1, last), wall_id, WALL_HEIGHT);
    scene.fill((n - wall, 0), (last, last), wall_id, WALL_HEIGHT);

    // interior walls: one along py at px = vx, one on each side along px
    let lo = n * 2 / 5;
    let hi = n * 3 / 5;
    let vx = rng.random_range(lo..=hi);
    let hy = [rng.random_range(lo..=hi), rng.random_range(lo..=hi)];
    scene.fill((vx, 0), (vx + wall - 1, last), wall_id, WALL_HEIGHT);
    scene.fill((0, hy[0]), (vx, hy[0] + wall - 1), wall_id, WALL_HEIGHT);
    scene.fill((vx, hy[1]), (last, hy[1] + wall - 1), wall_id, WALL_HEIGHT);

    let mut doors: Vec<((usize, usize), (usize, usize))> = Vec::new();
    let mut carve = |scene: &mut Scene, min: (usize, usize), max: (usize, usize)| {
        scene.fill(min, max, 0, 0.0);
        doors.push((min, max));
    };
    let margin = wall + door / 2;
    let low_top = hy[0].min(hy[1]);
    let high_bottom = hy[0].max(hy[1]) + wall;
    let d = rng.random_range(margin..=low_top - door - margin / 2);
    carve(&mut scene, (vx, d), (vx + wall - 1, d + door - 1));
    let d = rng.random_range(high_bottom + margin / 2..=n - wall - door - margin / 2);
    carve(&mut scene, (vx, d), (vx + wall - 1, d + door - 1));
    let d = rng.random_range(margin..=vx - door - margin / 2);
    carve(&mut scene, (d, hy[0]), (d + door - 1, hy[0] + wall - 1));
    let d = rng.random_range(vx + wall + margin / 2..=n - wall - door - margin / 2);
    carve(&mut scene, (d, hy[1]), (d + door - 1, hy[1] + wall - 1));

    if params.windows {
        for _ in 0..4 {
            let along = rng.random_range(wall + door..n - wall - 2 * door);
            match rng.random_range(0..4) {
                0 => scene.fill((along, 0), (along + door - 1, wall - 1), window_id, WALL_HEIGHT),
                1 => scene.fill((along, n - wall), (along + door - 1, last), window_id, WALL_HEIGHT),
                2 => scene.fill((0, along), (wall - 1, along + door - 1), window_id, WALL_HEIGHT),
                _ => scene.fill((n - wall, along), (last, along + door - 1), window_id, WALL_HEIGHT),
            }
        }
    }

    // cells near doors stay clear so rooms remain reachable
    let mut reserved = Mask::new(n, n);
    let keep = cells(0.8) as i64;
    for (min, max) in &doors {
        for px in min.0 as i64 - keep..=max.0 as i64 + keep {
            for py in min.1 as i64 - keep..=max.1 as i64 + keep {
                if scene.grid().contains(px, py) {
                    reserved.set(GridCoord::new(px as usize, py as usize), true);
                }
            }
        }
    }

    let rooms = [
        ((wall, wall), (vx - 1, hy[0] - 1)),
        ((wall, hy[0] + wall), (vx - 1, n - wall - 1)),
        ((vx + wall, wall), (n - wall - 1, hy[1] - 1)),
        ((vx + wall, hy[1] + wall), (n - wall - 1, n - wall - 1)),
    ];
    let gap = cells(params.clearance) as i64;
    let radius = (params.body_radius / s).ceil() as usize;
    for (rmin, rmax) in rooms {
        let count = rng.random_range(params.items_per_room.0..=params.items_per_room.1);
        for _ in 0..count {
            let name = &params.furniture[rng.random_range(0..params.furniture.len())];
            let f = furniture(name).unwrap();
            let (mut w, mut h) = (cells(f.size.0).max(1), cells(f.size.1).max(1));
            if rng.random_bool(0.5) {
                std::mem::swap(&mut w, &mut h);
            }
            for _attempt in 0..60 {
                let (x0, y0) = (rmin.0 as i64 + gap, rmin.1 as i64 + gap);
                let (x1, y1) = (rmax.0 as i64 - gap - w as i64 + 1, rmax.1 as i64 - gap - h as i64 + 1);
                if x1 < x0 || y1 < y0 {
                    break;
                }
                let px = rng.random_range(x0..=x1);
                let py = rng.random_range(y0..=y1);
                let clear = (px - gap..px + w as i64 + gap).all(|x| {
                    (py - gap..py + h as i64 + gap)
                        .all(|y| scene.cell(x, y).is_some_and(|(l, _)| l == 0) && !reserved.get_signed(x, y))
                });
                if !clear {
                    continue;
                }
                let before = (scene.label_grid.clone(), scene.heights.clone());
                let (a, b) = ((px as usize, py as usize), (px as usize + w - 1, py as usize + h - 1));
                scene.fill(a, b, id(name), f.height);
                if name == "table" && rng.random_bool(params.laptop_chance) {
                    let (lw, lh) = (cells(0.35).min(w), cells(0.25).min(h));
                    let (cx, cy) = (a.0 + (w - lw) / 2, a.1 + (h - lh) / 2);
                    scene.fill((cx, cy), (cx + lw - 1, cy + lh - 1), id("laptop"), LAPTOP_HEIGHT);
                }
                if !free_connected(&scene, radius) {
                    (scene.label_grid, scene.heights) = before;
                    continue;
                }
                break;
            }
        }
    }
    scene.validate()?;
    Ok(scene)
}

/// Hand-laid single room used by the scripted examples: a counter on the
/// south side, a sink and an oven along the east, a sofa in the west and a
/// table carrying a laptop.
pub fn kitchen_fixture() -> Scene {
    let labels = ["floor", "wall", "counter", "sink", "oven", "sofa", "table", "laptop"];
    let mut s = Scene::empty("kitchen-fixture", 0.05, 160, 160, &labels);
    s.fill((0, 0), (159, 2), 1, WALL_HEIGHT);
    s.fill((0, 157), (159, 159), 1, WALL_HEIGHT);
    s.fill((0, 0), (2, 159), 1, WALL_HEIGHT);
    s.fill((157, 0), (159, 159), 1, WALL_HEIGHT);
    s.fill((90, 10), (121, 21), 2, 0.9);
    s.fill((130, 60), (141, 69), 3, 0.9);
    s.fill((130, 90), (141, 101), 4, 0.9);
    s.fill((6, 90), (23, 125), 5, 0.8);
    s.fill((28, 42), (51, 57), 6, 0.7);
    s.fill((37, 48), (43, 52), 7, LAPTOP_HEIGHT);
    s
}
