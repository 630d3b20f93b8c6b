//! Open-vocabulary indexing of a map: per-cell argmax over label similarities,
//! label masks, 4-connected landmark components and their contours.

use std::collections::VecDeque;
use std::fs;
use std::io::{self, BufReader, BufWriter};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingMatrix, LabelSet};
use crate::geometry::{bearing, normalize_degrees, GridCoord};
use crate::map::VLMap;
use crate::nav::AgentState;

/// Label value of cells that never received a point.
pub const UNOBSERVED: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("map dimension {map} does not match label embedding dimension {labels}")]
    DimensionMismatch { map: usize, labels: usize },
    #[error("label index {index} out of range for {count} labels")]
    LabelOutOfRange { index: usize, count: usize },
    #[error("label image: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Per-cell label indices (`UNOBSERVED` where the map has no data) and the
/// winning raw dot product.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub rows: usize,
    pub cols: usize,
    pub num_labels: usize,
    pub labels: Vec<u32>,
    pub scores: Vec<f32>,
}

impl SegmentationResult {
    pub fn label_at(&self, c: GridCoord) -> u32 {
        self.labels[c.px * self.cols + c.py]
    }

    pub fn observed(&self) -> usize {
        self.labels.iter().filter(|l| **l != UNOBSERVED).count()
    }
}

/// Index of the best-scoring row, lowest index on ties.
pub fn argmax_label(q: &[f32], e: &EmbeddingMatrix) -> (u32, f64) {
    let mut best = (0u32, f64::NEG_INFINITY);
    for i in 0..e.rows() {
        let s = q.iter().zip(e.row(i)).fold(0.0f64, |acc, (a, b)| acc + *a as f64 * *b as f64);
        if s > best.1 {
            best = (i as u32, s);
        }
    }
    best
}

/// Labels every observed cell with the label whose embedding has the largest
/// dot product with the cell embedding. Rows are processed in parallel; each
/// cell is independent so the output does not depend on the partitioning.
pub fn segment(map: &VLMap, e: &EmbeddingMatrix) -> Result<SegmentationResult, IndexError> {
    if map.dim() != e.dim() {
        return Err(IndexError::DimensionMismatch { map: map.dim(), labels: e.dim() });
    }
    let grid = map.grid();
    let dim = map.dim();
    let counts = map.counts();
    let emb = map.embeddings();
    let (labels, scores): (Vec<u32>, Vec<f32>) = (0..grid.len())
        .into_par_iter()
        .with_min_len(grid.cols.max(1))
        .map(|i| {
            if counts[i] == 0 {
                (UNOBSERVED, f32::NAN)
            } else {
                let (l, s) = argmax_label(&emb[i * dim..(i + 1) * dim], e);
                (l, s as f32)
            }
        })
        .unzip();
    Ok(SegmentationResult { rows: grid.rows, cols: grid.cols, num_labels: e.rows(), labels, scores })
}

/// Row-major boolean grid over `(px, py)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![false; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(GridCoord) -> bool) -> Self {
        let data = (0..rows * cols).map(|i| f(GridCoord::new(i / cols, i % cols))).collect();
        Self { rows, cols, data }
    }

    pub fn get(&self, c: GridCoord) -> bool {
        self.data[c.px * self.cols + c.py]
    }

    /// `false` outside the grid.
    pub fn get_signed(&self, px: i64, py: i64) -> bool {
        px >= 0 && py >= 0 && (px as usize) < self.rows && (py as usize) < self.cols && self.data[px as usize * self.cols + py as usize]
    }

    pub fn set(&mut self, c: GridCoord, v: bool) {
        self.data[c.px * self.cols + c.py] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.data.iter().zip(&other.data).all(|(a, b)| !*a || *b)
    }

    pub fn cells(&self) -> impl Iterator<Item = GridCoord> + '_ {
        self.data.iter().enumerate().filter(|(_, v)| **v).map(|(i, _)| GridCoord::new(i / self.cols, i % self.cols))
    }
}

pub fn landmark_mask(r: &SegmentationResult, label_index: usize) -> Result<Mask, IndexError> {
    if label_index >= r.num_labels {
        return Err(IndexError::LabelOutOfRange { index: label_index, count: r.num_labels });
    }
    let target = label_index as u32;
    Ok(Mask { rows: r.rows, cols: r.cols, data: r.labels.iter().map(|l| *l == target).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_px: usize,
    pub min_py: usize,
    pub max_px: usize,
    pub max_py: usize,
}

impl BoundingBox {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        self.min_px as f64 <= px && px <= self.max_px as f64 && self.min_py as f64 <= py && py <= self.max_py as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkComponent {
    pub label: Option<usize>,
    pub cells: Vec<GridCoord>,
    pub centroid: (f64, f64),
    pub bbox: BoundingBox,
    /// Outer boundary cells in tracing order, starting at the first cell in
    /// row-major order.
    pub contour: Vec<GridCoord>,
}

impl LandmarkComponent {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Contour cells where the tracing direction changes.
    pub fn turning_points(&self) -> Vec<GridCoord> {
        let n = self.contour.len();
        if n < 3 {
            return self.contour.clone();
        }
        let dir = |a: GridCoord, b: GridCoord| (b.px as i64 - a.px as i64, b.py as i64 - a.py as i64);
        (0..n)
            .filter(|&i| {
                let prev = self.contour[(i + n - 1) % n];
                let cur = self.contour[i];
                let next = self.contour[(i + 1) % n];
                dir(prev, cur) != dir(cur, next)
            })
            .map(|i| self.contour[i])
            .collect()
    }

    /// Component cell closest to `(px, py)`, first in row-major order on ties.
    pub fn nearest_cell(&self, px: f64, py: f64) -> GridCoord {
        let d = |c: &GridCoord| (c.px as f64 - px).powi(2) + (c.py as f64 - py).powi(2);
        let mut best = self.cells[0];
        for c in &self.cells[1..] {
            if d(c) < d(&best) {
                best = *c;
            }
        }
        best
    }

    pub fn centroid_cell(&self) -> GridCoord {
        GridCoord::new(self.centroid.0.round() as usize, self.centroid.1.round() as usize)
    }
}

/// How a landmark is turned into a goal cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalCell {
    #[default]
    Centroid,
    NearestCell,
}

const NEIGHBORS_4: [(i64, i64); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];
/// Clockwise with rows growing downwards: N, NE, E, SE, S, SW, W, NW.
const MOORE: [(i64, i64); 8] = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)];

/// 4-connected components ordered by their first cell in row-major order.
pub fn find_components(mask: &Mask) -> Vec<LandmarkComponent> {
    let mut seen = vec![false; mask.data.len()];
    let mut out = Vec::new();
    for start in 0..mask.data.len() {
        if !mask.data[start] || seen[start] {
            continue;
        }
        let mut cells = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            let c = GridCoord::new(i / mask.cols, i % mask.cols);
            cells.push(c);
            for (dr, dc) in NEIGHBORS_4 {
                let (r, k) = (c.px as i64 + dr, c.py as i64 + dc);
                if mask.get_signed(r, k) {
                    let j = r as usize * mask.cols + k as usize;
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        cells.sort();
        out.push(component_from_cells(cells, mask));
    }
    out
}

fn component_from_cells(cells: Vec<GridCoord>, mask: &Mask) -> LandmarkComponent {
    let n = cells.len() as f64;
    let (sx, sy) = cells.iter().fold((0.0, 0.0), |(a, b), c| (a + c.px as f64, b + c.py as f64));
    let bbox = BoundingBox {
        min_px: cells.iter().map(|c| c.px).min().unwrap(),
        min_py: cells.iter().map(|c| c.py).min().unwrap(),
        max_px: cells.iter().map(|c| c.px).max().unwrap(),
        max_py: cells.iter().map(|c| c.py).max().unwrap(),
    };
    let member: std::collections::HashSet<GridCoord> = cells.iter().copied().collect();
    let inside = |r: i64, k: i64| r >= 0 && k >= 0 && mask.get_signed(r, k) && member.contains(&GridCoord::new(r as usize, k as usize));
    let contour = trace_boundary(cells[0], &inside, cells.len());
    LandmarkComponent { label: None, cells, centroid: (sx / n, sy / n), bbox, contour }
}

/// Moore-neighbor boundary tracing with Jacob's stopping criterion.
fn trace_boundary(start: GridCoord, inside: &dyn Fn(i64, i64) -> bool, size: usize) -> Vec<GridCoord> {
    let s = (start.px as i64, start.py as i64);
    let dir_of = |from: (i64, i64), to: (i64, i64)| MOORE.iter().position(|d| (from.0 + d.0, from.1 + d.1) == to).unwrap();
    let step = |p: (i64, i64), b: (i64, i64)| -> Option<((i64, i64), (i64, i64))> {
        let d0 = dir_of(p, b);
        let mut prev = b;
        for i in 1..=8 {
            let d = MOORE[(d0 + i) % 8];
            let c = (p.0 + d.0, p.1 + d.1);
            if inside(c.0, c.1) {
                return Some((c, prev));
            }
            prev = c;
        }
        None
    };
    let to_coord = |p: (i64, i64)| GridCoord::new(p.0 as usize, p.1 as usize);
    let mut contour = vec![start];
    let Some((first, mut b)) = step(s, (s.0, s.1 - 1)) else {
        return contour;
    };
    let mut p = first;
    // every boundary cell is entered at most from each of its 8 sides
    let cap = 8 * size + 8;
    for _ in 0..cap {
        if p == s {
            match step(p, b) {
                Some((next, _)) if next == first => break,
                _ => {}
            }
        }
        contour.push(to_coord(p));
        match step(p, b) {
            Some((next, nb)) => {
                p = next;
                b = nb;
            }
            None => break,
        }
    }
    contour
}

/// Closest component centroid to the agent; with `front_only`, only centroids
/// within ±90° of the agent heading are candidates.
pub fn nearest_component<'a>(
    components: &'a [LandmarkComponent],
    robot: &AgentState,
    front_only: bool,
) -> Option<&'a LandmarkComponent> {
    let mut best: Option<(&LandmarkComponent, f64)> = None;
    for c in components {
        let (dx, dy) = (c.centroid.0 - robot.px, c.centroid.1 - robot.py);
        let dist = (dx * dx + dy * dy).sqrt();
        if front_only && dist > 0.0 && normalize_degrees(bearing(dx, dy) - robot.heading).abs() > 90.0 {
            continue;
        }
        if best.is_none_or(|(_, d)| dist < d) {
            best = Some((c, dist));
        }
    }
    best.map(|(c, _)| c)
}

/// Deterministic, well-separated display color for label `i`.
pub fn label_color(i: usize) -> [u8; 3] {
    let hue = (i as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let (s, v) = (0.65, if i % 2 == 0 { 0.95 } else { 0.75 });
    let c = v * s;
    let x = c * (1.0 - ((hue % 2.0) - 1.0).abs());
    let (r, g, b) = match hue as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [((r + m) * 255.0).round() as u8, ((g + m) * 255.0).round() as u8, ((b + m) * 255.0).round() as u8]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub label: String,
    pub index: usize,
    pub palette_index: u8,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Legend {
    pub unobserved_palette_index: u8,
    pub unobserved_color: [u8; 3],
    pub labels: Vec<LegendEntry>,
}

pub fn legend(labels: &LabelSet) -> Legend {
    Legend {
        unobserved_palette_index: 0,
        unobserved_color: [0, 0, 0],
        labels: labels
            .iter()
            .enumerate()
            .map(|(i, l)| LegendEntry { label: l.to_string(), index: i, palette_index: (i + 1) as u8, color: label_color(i) })
            .collect(),
    }
}

/// Writes a label grid as an 8-bit indexed PNG: image row = `px`, column =
/// `py`, palette index 0 = unobserved, `i + 1` = label `i`.
pub fn write_label_png(path: &Path, rows: usize, cols: usize, labels: &[u32], num_labels: usize) -> Result<(), IndexError> {
    if num_labels > 255 {
        return Err(IndexError::Image(format!("{num_labels} labels do not fit an 8-bit palette")));
    }
    let mut palette = vec![0u8; 3];
    for i in 0..num_labels {
        palette.extend_from_slice(&label_color(i));
    }
    let data: Vec<u8> = labels
        .iter()
        .map(|l| match *l {
            UNOBSERVED => Ok(0),
            l if (l as usize) < num_labels => Ok(l as u8 + 1),
            l => Err(IndexError::LabelOutOfRange { index: l as usize, count: num_labels }),
        })
        .collect::<Result<_, _>>()?;
    let file = fs::File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), cols as u32, rows as u32);
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_palette(palette);
    let mut writer = enc.write_header().map_err(|e| IndexError::Image(e.to_string()))?;
    writer.write_image_data(&data).map_err(|e| IndexError::Image(e.to_string()))?;
    writer.finish().map_err(|e| IndexError::Image(e.to_string()))?;
    Ok(())
}

/// Reads a label PNG written by [`write_label_png`]; returns `(rows, cols, labels)`.
pub fn read_label_png(path: &Path) -> Result<(usize, usize, Vec<u32>), IndexError> {
    let file = fs::File::open(path)?;
    let mut dec = png::Decoder::new(BufReader::new(file));
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut reader = dec.read_info().map_err(|e| IndexError::Image(e.to_string()))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Indexed || info.bit_depth != png::BitDepth::Eight {
        return Err(IndexError::Image("expected an 8-bit indexed PNG".into()));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| IndexError::Image("image too large".into()))?];
    let frame = reader.next_frame(&mut buf).map_err(|e| IndexError::Image(e.to_string()))?;
    let buf = &buf[..frame.buffer_size()];
    let labels = buf.iter().map(|p| if *p == 0 { UNOBSERVED } else { *p as u32 - 1 }).collect();
    Ok((h, w, labels))
}
