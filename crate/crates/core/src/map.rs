//! The visual-language grid map: running-average embedding fusion, the
//! height-filtered occupancy layer and the `VLMP` binary file format.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{back_project, to_world, GeometryError, GridCoord, GridSpec, Intrinsics, PixelCoord, Pose};

pub const MAP_MAGIC: &[u8; 4] = b"VLMP";
pub const MAP_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IntegrationError {
    #[error("frame embedding dimension {frame} does not match map dimension {map}")]
    DimensionMismatch { map: usize, frame: usize },
    #[error("frame provider {frame:?} does not match map provider {map:?}")]
    ProviderMismatch { map: String, frame: String },
    #[error("malformed frame: {0}")]
    Shape(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum MapFormatError {
    #[error("not a map file (bad magic)")]
    BadMagic,
    #[error("unsupported map version {0}")]
    UnsupportedVersion(u32),
    #[error("map file truncated")]
    Truncated,
    #[error("payload checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("invalid map header: {0}")]
    InvalidHeader(String),
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
    #[error("{0} unexpected bytes after checksum")]
    TrailingBytes(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Map construction parameters. Heights are meters above the floor plane y=0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapParams {
    pub scale: f32,
    pub rows: usize,
    pub cols: usize,
    pub t1: f32,
    pub t2: f32,
}

impl Default for MapParams {
    fn default() -> Self {
        Self { scale: 0.05, rows: 1000, cols: 1000, t1: 0.2, t2: 1.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationOptions {
    /// Depths beyond this are treated as holes.
    pub max_depth: f64,
    /// Integrate every `stride`-th pixel in both image directions.
    pub stride: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self { max_depth: 10.0, stride: 1 }
    }
}

/// One posed depth image with per-pixel embeddings (`H x W x C`, C innermost).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFrame {
    pub frame_id: String,
    pub provider_id: String,
    pub intrinsics: Intrinsics,
    pub pose: Pose,
    pub dim: usize,
    pub depth: Vec<f32>,
    pub embeddings: Vec<f32>,
}

impl EmbeddingFrame {
    pub fn validate(&self) -> Result<(), IntegrationError> {
        self.intrinsics.validate()?;
        self.pose.validate()?;
        let n = self.intrinsics.width as usize * self.intrinsics.height as usize;
        if self.depth.len() != n {
            return Err(IntegrationError::Shape(format!("depth has {} values, expected {n}", self.depth.len())));
        }
        if self.dim == 0 || self.embeddings.len() != n * self.dim {
            return Err(IntegrationError::Shape(format!(
                "embeddings have {} values, expected {}",
                self.embeddings.len(),
                n * self.dim
            )));
        }
        Ok(())
    }

    pub fn pixel_embedding(&self, u: u32, v: u32) -> &[f32] {
        let i = (v as usize * self.intrinsics.width as usize + u as usize) * self.dim;
        &self.embeddings[i..i + self.dim]
    }
}

/// Per-frame integration tally.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IntegrationStats {
    pub integrated: u64,
    pub invalid_depth: u64,
    pub out_of_bounds: u64,
    pub occupied_points: u64,
}

impl IntegrationStats {
    pub fn merge(&mut self, other: &IntegrationStats) {
        self.integrated += other.integrated;
        self.invalid_depth += other.invalid_depth;
        self.out_of_bounds += other.out_of_bounds;
        self.occupied_points += other.occupied_points;
    }
}

/// Top-down grid of averaged embeddings with observation counts and the
/// occupancy layer. Cells are row-major over `(px, py)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VLMap {
    params: MapParams,
    dim: usize,
    provider_id: String,
    counts: Vec<u32>,
    occupancy: Vec<bool>,
    embeddings: Vec<f32>,
    diagnostics: IntegrationStats,
}

impl VLMap {
    pub fn new(params: MapParams, dim: usize, provider_id: impl Into<String>) -> Result<Self, GeometryError> {
        GridSpec::new(params.scale as f64, params.rows, params.cols)?;
        if !(params.t1.is_finite() && params.t2.is_finite() && params.t1 <= params.t2) {
            return Err(GeometryError::InvalidGrid(format!("height band [{}, {}] is empty", params.t1, params.t2)));
        }
        if dim == 0 {
            return Err(GeometryError::InvalidGrid("embedding dimension must be positive".into()));
        }
        let n = params.rows * params.cols;
        Ok(Self {
            params,
            dim,
            provider_id: provider_id.into(),
            counts: vec![0; n],
            occupancy: vec![false; n],
            embeddings: vec![0.0; n * dim],
            diagnostics: IntegrationStats::default(),
        })
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec { scale: self.params.scale as f64, rows: self.params.rows, cols: self.params.cols }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn embeddings(&self) -> &[f32] {
        &self.embeddings
    }

    pub fn diagnostics(&self) -> &IntegrationStats {
        &self.diagnostics
    }

    pub fn cell_embedding(&self, c: GridCoord) -> &[f32] {
        let i = self.grid().index(c) * self.dim;
        &self.embeddings[i..i + self.dim]
    }

    pub fn count(&self, c: GridCoord) -> u32 {
        self.counts[self.grid().index(c)]
    }

    pub fn is_occupied(&self, c: GridCoord) -> bool {
        self.occupancy[self.grid().index(c)]
    }

    pub fn observed_cells(&self) -> usize {
        self.counts.iter().filter(|c| **c > 0).count()
    }

    /// Fuses one embedded point into `cell`; `height` drives the occupancy layer.
    pub fn fuse_point(&mut self, cell: GridCoord, embedding: &[f32], height: f64) -> bool {
        let idx = self.grid().index(cell);
        let n = self.counts[idx] as f64;
        let mean = &mut self.embeddings[idx * self.dim..(idx + 1) * self.dim];
        for (m, q) in mean.iter_mut().zip(embedding) {
            let old = *m as f64;
            *m = (old + (*q as f64 - old) / (n + 1.0)) as f32;
        }
        self.counts[idx] = self.counts[idx].saturating_add(1);
        // thresholds are stored as f32, so compare at that precision
        let h = height as f32;
        let occupied = self.params.t1 <= h && h <= self.params.t2;
        if occupied {
            self.occupancy[idx] = true;
        }
        occupied
    }

    pub fn integrate_frame(
        &mut self,
        frame: &EmbeddingFrame,
        opts: &IntegrationOptions,
    ) -> Result<IntegrationStats, IntegrationError> {
        if frame.dim != self.dim {
            return Err(IntegrationError::DimensionMismatch { map: self.dim, frame: frame.dim });
        }
        if frame.provider_id != self.provider_id {
            return Err(IntegrationError::ProviderMismatch {
                map: self.provider_id.clone(),
                frame: frame.provider_id.clone(),
            });
        }
        frame.validate()?;
        let grid = self.grid();
        let stride = opts.stride.max(1);
        let k = &frame.intrinsics;
        let mut stats = IntegrationStats::default();
        for v in (0..k.height).step_by(stride) {
            for u in (0..k.width).step_by(stride) {
                let d = frame.depth[(v * k.width + u) as usize] as f64;
                if !(d.is_finite() && d > 0.0 && d <= opts.max_depth) {
                    stats.invalid_depth += 1;
                    continue;
                }
                let local = back_project(PixelCoord::new(u, v), d, k)?;
                let world = to_world(local, &frame.pose);
                let Some(cell) = grid.project(&world) else {
                    stats.out_of_bounds += 1;
                    continue;
                };
                if self.fuse_point(cell, frame.pixel_embedding(u, v), world.y) {
                    stats.occupied_points += 1;
                }
                stats.integrated += 1;
            }
        }
        self.diagnostics.merge(&stats);
        Ok(stats)
    }

    fn header_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAP_MAGIC);
        out.extend_from_slice(&MAP_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.params.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.params.cols as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&self.params.scale.to_le_bytes());
        out.extend_from_slice(&self.params.t1.to_le_bytes());
        out.extend_from_slice(&self.params.t2.to_le_bytes());
        out.extend_from_slice(&(self.provider_id.len() as u16).to_le_bytes());
        out.extend_from_slice(self.provider_id.as_bytes());
        out
    }

    fn payload_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.counts.len() * 5 + self.embeddings.len() * 4);
        for c in &self.counts {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend(self.occupancy.iter().map(|o| *o as u8));
        for e in &self.embeddings {
            out.extend_from_slice(&e.to_le_bytes());
        }
        out
    }

    /// CRC32 of the payload, used as a short content id.
    pub fn content_id(&self) -> String {
        format!("{:08x}", crc32fast::hash(&self.payload_bytes()))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, MapFormatError> {
        if self.provider_id.len() > u16::MAX as usize {
            return Err(MapFormatError::InvalidHeader("provider id longer than 65535 bytes".into()));
        }
        let mut out = self.header_bytes();
        let payload = self.payload_bytes();
        let crc = crc32fast::hash(&payload);
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MapFormatError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAP_MAGIC {
            return Err(MapFormatError::BadMagic);
        }
        let version = r.u32()?;
        if version != MAP_VERSION {
            return Err(MapFormatError::UnsupportedVersion(version));
        }
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let scale = r.f32()?;
        let t1 = r.f32()?;
        let t2 = r.f32()?;
        let id_len = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
        let provider_id = std::str::from_utf8(r.take(id_len)?)
            .map_err(|_| MapFormatError::InvalidHeader("provider id is not UTF-8".into()))?
            .to_string();
        let params = MapParams { scale, rows, cols, t1, t2 };
        let cells = rows
            .checked_mul(cols)
            .ok_or_else(|| MapFormatError::InvalidHeader("grid size overflows".into()))?;
        let payload_len = cells
            .checked_mul(5 + dim.checked_mul(4).ok_or(MapFormatError::Truncated)?)
            .ok_or_else(|| MapFormatError::InvalidHeader("payload size overflows".into()))?;
        let payload = r.take(payload_len)?;
        let stored = r.u32()?;
        if r.pos != bytes.len() {
            return Err(MapFormatError::TrailingBytes(bytes.len() - r.pos));
        }
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(MapFormatError::Checksum { stored, computed });
        }
        let mut map = VLMap::new(params, dim, provider_id).map_err(|e| MapFormatError::InvalidHeader(e.to_string()))?;
        let (count_bytes, rest) = payload.split_at(cells * 4);
        let (occ_bytes, emb_bytes) = rest.split_at(cells);
        for (c, b) in map.counts.iter_mut().zip(count_bytes.chunks_exact(4)) {
            *c = u32::from_le_bytes(b.try_into().unwrap());
        }
        for (o, b) in map.occupancy.iter_mut().zip(occ_bytes) {
            *o = match b {
                0 => false,
                1 => true,
                other => return Err(MapFormatError::CorruptPayload(format!("occupancy byte {other}"))),
            };
        }
        for (e, b) in map.embeddings.iter_mut().zip(emb_bytes.chunks_exact(4)) {
            *e = f32::from_le_bytes(b.try_into().unwrap());
        }
        Ok(map)
    }

    pub fn save(&self, path: &Path) -> Result<(), MapFormatError> {
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MapFormatError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MapFormatError> {
        let end = self.pos.checked_add(n).ok_or(MapFormatError::Truncated)?;
        if end > self.bytes.len() {
            return Err(MapFormatError::Truncated);
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, MapFormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, MapFormatError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
