//! Ray-cast renderer over a scene's height field and the exploration pass
//! that turns a scene into a built map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scene::Scene;
use super::SimError;
use crate::embedding::{EmbeddingProvider, RgbImage, SyntheticProvider};
use crate::geometry::{back_project, to_world, GridCoord, GridSpec, Intrinsics, PixelCoord, Pose, WorldPoint};
use crate::index::{Mask, UNOBSERVED};
use crate::map::{EmbeddingFrame, IntegrationOptions, IntegrationStats, MapParams, VLMap};
use crate::obstacle::inflate;

/// Camera mounted on the exploring robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraRig {
    pub width: u32,
    pub height: u32,
    pub hfov_deg: f64,
    /// Camera height above the floor, meters.
    pub mount_height: f64,
    pub pitch_down_deg: f64,
    pub max_depth: f64,
}

impl Default for CameraRig {
    fn default() -> Self {
        Self { width: 64, height: 48, hfov_deg: 90.0, mount_height: 1.2, pitch_down_deg: 30.0, max_depth: 10.0 }
    }
}

impl CameraRig {
    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics::from_fov(self.width, self.height, self.hfov_deg).expect("camera rig has a valid image size")
    }

    /// Camera pose above fractional cell `(px, py)` facing a compass heading.
    pub fn pose(&self, grid: &GridSpec, px: f64, py: f64, heading_deg: f64) -> Pose {
        let p = grid.point_at(px, py);
        Pose::looking(WorldPoint::new(p.x, self.mount_height, p.z), heading_deg, self.pitch_down_deg)
    }
}

/// A rendered view: the embedding frame plus the ground truth behind every
/// pixel (scene label index and point height, `UNOBSERVED` for holes).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub frame: EmbeddingFrame,
    pub labels: Vec<u32>,
    pub heights: Vec<f32>,
}

/// Distance along `dir` (whose camera-frame depth component is 1) to the first
/// column the ray meets, or `None` if it leaves the grid or range first.
fn cast(scene: &Scene, grid: &GridSpec, origin: WorldPoint, dir: [f64; 3], max_t: f64) -> Option<f64> {
    let (a0, b0) = grid.continuous(&origin);
    let da = dir[0] / grid.scale;
    let db = -dir[2] / grid.scale;
    let (mut ia, mut ib) = (a0.floor() as i64, b0.floor() as i64);
    let step_a: i64 = if da > 0.0 { 1 } else { -1 };
    let step_b: i64 = if db > 0.0 { 1 } else { -1 };
    let next = |i: i64, s: i64, x0: f64, d: f64| {
        if d == 0.0 {
            f64::INFINITY
        } else {
            let boundary = if s > 0 { (i + 1) as f64 } else { i as f64 };
            (boundary - x0) / d
        }
    };
    let mut t_a = next(ia, step_a, a0, da);
    let mut t_b = next(ib, step_b, b0, db);
    let dt_a = if da == 0.0 { f64::INFINITY } else { 1.0 / da.abs() };
    let dt_b = if db == 0.0 { f64::INFINITY } else { 1.0 / db.abs() };
    let mut t_enter = 0.0;
    while t_enter <= max_t {
        let (_, h) = scene.cell(ia, ib)?;
        let t_exit = t_a.min(t_b).min(max_t);
        // part of the cell's segment where 0 <= y <= h
        let (lo, hi) = if dir[1] == 0.0 {
            if (0.0..=h as f64).contains(&origin.y) {
                (t_enter, t_exit)
            } else {
                (1.0, 0.0)
            }
        } else {
            let ta = -origin.y / dir[1];
            let tb = (h as f64 - origin.y) / dir[1];
            (ta.min(tb).max(t_enter), ta.max(tb).min(t_exit))
        };
        if lo <= hi && hi > 0.0 {
            // a quarter of the way in: near the surface, inside the cell
            return Some(lo + 0.25 * (hi - lo));
        }
        if t_a < t_b {
            t_enter = t_a;
            t_a += dt_a;
            ia += step_a;
        } else {
            t_enter = t_b;
            t_b += dt_b;
            ib += step_b;
        }
    }
    None
}

/// Depth and ground truth for one camera pose, before embedding.
fn render_raw(scene: &Scene, grid: &GridSpec, rig: &CameraRig, pose: &Pose) -> (Vec<f32>, Vec<u32>, Vec<f32>) {
    let k = rig.intrinsics();
    let n = (k.width * k.height) as usize;
    let (mut depth, mut labels, mut heights) = (vec![0.0f32; n], vec![UNOBSERVED; n], vec![0.0f32; n]);
    let origin = pose.position();
    for v in 0..k.height {
        for u in 0..k.width {
            let px = PixelCoord::new(u, v);
            let dir = pose.rotate(k.ray(px));
            let Some(t) = cast(scene, grid, origin, dir, rig.max_depth) else { continue };
            let d = t as f32;
            if !(d > 0.0 && d as f64 <= rig.max_depth) {
                continue;
            }
            // label by where the map will put the stored depth, so the
            // ground truth agrees with integration bit for bit
            let world = to_world(back_project(px, d as f64, &k).expect("positive depth"), pose);
            let Some(cell) = grid.project(&world) else { continue };
            let i = (v * k.width + u) as usize;
            depth[i] = d;
            labels[i] = scene.label_at(cell);
            heights[i] = world.y as f32;
        }
    }
    (depth, labels, heights)
}

/// Scene label index to synthetic vocabulary color.
fn palette(scene: &Scene, provider: &SyntheticProvider) -> Result<Vec<[u8; 3]>, SimError> {
    scene
        .labels
        .iter()
        .map(|l| {
            provider
                .vocabulary_index(l)
                .map(SyntheticProvider::label_color)
                .ok_or_else(|| SimError::Scene(format!("label {l:?} is not in the provider vocabulary")))
        })
        .collect()
}

fn embed(
    scene: &Scene,
    provider: &SyntheticProvider,
    colors: &[[u8; 3]],
    rig: &CameraRig,
    pose: Pose,
    frame_id: String,
) -> Result<RenderedFrame, SimError> {
    let grid = scene.grid();
    let (depth, labels, heights) = render_raw(scene, &grid, rig, &pose);
    let image = RgbImage {
        width: rig.width,
        height: rig.height,
        data: labels.iter().map(|&l| colors[if l == UNOBSERVED { 0 } else { l as usize }]).collect(),
    };
    let emb = provider.embed_image(&image)?;
    Ok(RenderedFrame {
        frame: EmbeddingFrame {
            frame_id,
            provider_id: provider.id().to_string(),
            intrinsics: rig.intrinsics(),
            pose,
            dim: provider.dim(),
            depth,
            embeddings: emb.data,
        },
        labels,
        heights,
    })
}

/// Renders one view of the scene. Holes (sky, out of range, off the grid)
/// have depth 0.
pub fn render_frame(
    scene: &Scene,
    provider: &SyntheticProvider,
    rig: &CameraRig,
    pose: &Pose,
) -> Result<RenderedFrame, SimError> {
    let colors = palette(scene, provider)?;
    embed(scene, provider, &colors, rig, *pose, format!("{}-view", scene.name))
}

/// A camera stop during exploration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewPoint {
    pub px: f64,
    pub py: f64,
    pub heading: f64,
}

/// Lattice of stops `spacing` meters apart on cells a robot of radius
/// `clearance_radius` can stand on, each looking in eight directions.
pub fn exploration_views(scene: &Scene, spacing: f64, clearance_radius: f64) -> Vec<ViewPoint> {
    let s = scene.scale as f64;
    let step = ((spacing / s).round() as usize).max(1);
    let blocked = inflate(&scene.blocked(0.2), (clearance_radius / s).ceil() as usize);
    let mut out = Vec::new();
    for px in (step / 2..scene.rows).step_by(step) {
        for py in (step / 2..scene.cols).step_by(step) {
            if blocked.get(GridCoord::new(px, py)) {
                continue;
            }
            for k in 0..8 {
                out.push(ViewPoint { px: px as f64, py: py as f64, heading: k as f64 * 45.0 });
            }
        }
    }
    out
}

/// Exploration settings for building a map from a scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExploreOptions {
    pub rig: CameraRig,
    pub spacing: f64,
    pub clearance_radius: f64,
    pub t1: f32,
    pub t2: f32,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        let m = MapParams::default();
        Self { rig: CameraRig::default(), spacing: 0.8, clearance_radius: 0.18, t1: m.t1, t2: m.t2 }
    }
}

/// Highest-point label per cell, accumulated frame by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TopDownLabels {
    pub grid: GridSpec,
    pub labels: Vec<u32>,
    top: Vec<f32>,
}

impl TopDownLabels {
    pub fn new(grid: GridSpec) -> Self {
        Self { grid, labels: vec![UNOBSERVED; grid.len()], top: vec![f32::NEG_INFINITY; grid.len()] }
    }

    /// Adds one labeled point; a cell's label changes only when the new
    /// point is strictly higher than every earlier one.
    pub fn add_point(&mut self, cell: GridCoord, label: u32, height: f32) {
        let i = self.grid.index(cell);
        if height > self.top[i] {
            self.top[i] = height;
            self.labels[i] = label;
        }
    }

    /// Back-projects every valid pixel of a labeled frame.
    pub fn add_frame(&mut self, frame: &EmbeddingFrame, labels: &[u32]) {
        let k = &frame.intrinsics;
        for v in 0..k.height {
            for u in 0..k.width {
                let i = (v * k.width + u) as usize;
                let d = frame.depth[i] as f64;
                if labels[i] == UNOBSERVED || !(d.is_finite() && d > 0.0) {
                    continue;
                }
                let Ok(local) = back_project(PixelCoord::new(u, v), d, k) else { continue };
                let world = to_world(local, &frame.pose);
                if let Some(cell) = self.grid.project(&world) {
                    self.add_point(cell, labels[i], world.y as f32);
                }
            }
        }
    }
}

/// Ground-truth top-down label grid from labeled frames.
pub fn build_gt_topdown(frames: &[RenderedFrame], grid: GridSpec) -> Vec<u32> {
    let mut acc = TopDownLabels::new(grid);
    for f in frames {
        acc.add_frame(&f.frame, &f.labels);
    }
    acc.labels
}

#[derive(Debug, Clone)]
pub struct SceneMap {
    pub map: VLMap,
    /// Ground-truth top-down labels from the same frames.
    pub gt_topdown: Vec<u32>,
    pub frames: usize,
    pub stats: IntegrationStats,
}

/// Renders `views` in parallel batches and hands the frames to `sink` in
/// view order.
pub fn render_views(
    scene: &Scene,
    provider: &SyntheticProvider,
    rig: &CameraRig,
    views: &[ViewPoint],
    mut sink: impl FnMut(RenderedFrame) -> Result<(), SimError>,
) -> Result<(), SimError> {
    let grid = scene.grid();
    let colors = palette(scene, provider)?;
    for (c, chunk) in views.chunks(64).enumerate() {
        let rendered: Vec<RenderedFrame> = chunk
            .par_iter()
            .enumerate()
            .map(|(j, v)| {
                let pose = rig.pose(&grid, v.px, v.py, v.heading);
                embed(scene, provider, &colors, rig, pose, format!("{}-{:05}", scene.name, c * 64 + j))
            })
            .collect::<Result<_, _>>()?;
        for r in rendered {
            sink(r)?;
        }
    }
    Ok(())
}

pub fn map_params(scene: &Scene, opts: &ExploreOptions) -> MapParams {
    MapParams { scale: scene.scale, rows: scene.rows, cols: scene.cols, t1: opts.t1, t2: opts.t2 }
}

/// Explores the scene and fuses every view in a fixed order, so the result
/// does not depend on thread count.
pub fn build_scene_map(
    scene: &Scene,
    provider: &SyntheticProvider,
    opts: &ExploreOptions,
) -> Result<SceneMap, SimError> {
    let mut map = VLMap::new(map_params(scene, opts), provider.dim(), provider.id())
        .map_err(|e| SimError::Scene(e.to_string()))?;
    let views = exploration_views(scene, opts.spacing, opts.clearance_radius);
    let integration = IntegrationOptions { max_depth: opts.rig.max_depth, stride: 1 };
    let mut topdown = TopDownLabels::new(scene.grid());
    let mut stats = IntegrationStats::default();
    render_views(scene, provider, &opts.rig, &views, |r| {
        stats.merge(&map.integrate_frame(&r.frame, &integration)?);
        topdown.add_frame(&r.frame, &r.labels);
        Ok(())
    })?;
    Ok(SceneMap { map, gt_topdown: topdown.labels, frames: views.len(), stats })
}

/// Cells the scene's ground truth marks as floor-level and reachable, used
/// by tests that need a free-space reference.
pub fn ground_free(scene: &Scene, radius_cells: usize) -> Mask {
    let b = inflate(&scene.blocked(0.2), radius_cells);
    Mask { rows: b.rows, cols: b.cols, data: b.data.iter().map(|&x| !x).collect() }
}
