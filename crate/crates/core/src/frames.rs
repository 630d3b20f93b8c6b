//! On-disk store of embedding frames: a `manifest.json` plus one little-endian
//! binary file per frame (f32 depth, f64 row-major pose, f32 embeddings).

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Intrinsics, Pose};
use crate::map::EmbeddingFrame;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FrameStoreError {
    #[error("missing manifest at {0}")]
    MissingManifest(PathBuf),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("frame {id}: {reason}")]
    Frame { id: String, reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub id: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub provider_id: String,
    pub dim: usize,
    pub intrinsics: Intrinsics,
    pub frames: Vec<FrameEntry>,
}

/// A frame store directory opened for reading.
#[derive(Debug, Clone)]
pub struct FrameStore {
    root: PathBuf,
    manifest: Manifest,
}

impl FrameStore {
    pub fn open(root: &Path) -> Result<Self, FrameStoreError> {
        let path = root.join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(FrameStoreError::MissingManifest(path));
        }
        let manifest: Manifest =
            serde_json::from_slice(&fs::read(&path)?).map_err(|e| FrameStoreError::Manifest(e.to_string()))?;
        if manifest.version != STORE_VERSION {
            return Err(FrameStoreError::Manifest(format!("unsupported store version {}", manifest.version)));
        }
        if manifest.dim == 0 {
            return Err(FrameStoreError::Manifest("dim must be positive".into()));
        }
        manifest.intrinsics.validate()?;
        Ok(Self { root: root.to_path_buf(), manifest })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.manifest.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frames.is_empty()
    }

    pub fn read(&self, index: usize) -> Result<EmbeddingFrame, FrameStoreError> {
        let entry = &self.manifest.frames[index];
        let bytes = fs::read(self.root.join(&entry.file))?;
        decode_frame(&bytes, entry, &self.manifest)
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<EmbeddingFrame, FrameStoreError>> + '_ {
        (0..self.len()).map(move |i| self.read(i))
    }
}

fn decode_frame(bytes: &[u8], entry: &FrameEntry, m: &Manifest) -> Result<EmbeddingFrame, FrameStoreError> {
    let n = m.intrinsics.width as usize * m.intrinsics.height as usize;
    let expected = n * 4 + 16 * 8 + n * m.dim * 4;
    if bytes.len() != expected {
        return Err(FrameStoreError::Frame {
            id: entry.id.clone(),
            reason: format!("expected {expected} bytes, found {}", bytes.len()),
        });
    }
    let (depth_bytes, rest) = bytes.split_at(n * 4);
    let (pose_bytes, emb_bytes) = rest.split_at(128);
    let depth = depth_bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let mut pose = [0f64; 16];
    for (p, c) in pose.iter_mut().zip(pose_bytes.chunks_exact(8)) {
        *p = f64::from_le_bytes(c.try_into().unwrap());
    }
    let pose = Pose::from_row_major(&pose)
        .map_err(|e| FrameStoreError::Frame { id: entry.id.clone(), reason: e.to_string() })?;
    let embeddings = emb_bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(EmbeddingFrame {
        frame_id: entry.id.clone(),
        provider_id: m.provider_id.clone(),
        intrinsics: m.intrinsics,
        pose,
        dim: m.dim,
        depth,
        embeddings,
    })
}

pub fn encode_frame(frame: &EmbeddingFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(frame.depth.len() * 4 + 128 + frame.embeddings.len() * 4);
    for d in &frame.depth {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for p in frame.pose.to_row_major() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    for e in &frame.embeddings {
        out.extend_from_slice(&e.to_le_bytes());
    }
    out
}

/// Streams frames into a store directory; the manifest is written last.
#[derive(Debug)]
pub struct StoreWriter {
    root: PathBuf,
    first: Option<(Intrinsics, usize, String)>,
    entries: Vec<FrameEntry>,
}

impl StoreWriter {
    pub fn create(root: &Path) -> Result<Self, FrameStoreError> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), first: None, entries: Vec::new() })
    }

    /// Every frame must share the first frame's camera, dimension and provider.
    pub fn push(&mut self, f: &EmbeddingFrame) -> Result<(), FrameStoreError> {
        let key = (f.intrinsics, f.dim, f.provider_id.clone());
        if *self.first.get_or_insert_with(|| key.clone()) != key {
            return Err(FrameStoreError::Frame {
                id: f.frame_id.clone(),
                reason: "camera, dimension and provider must match the first frame".into(),
            });
        }
        f.validate().map_err(|e| FrameStoreError::Frame { id: f.frame_id.clone(), reason: e.to_string() })?;
        let file = format!("{}.bin", f.frame_id);
        fs::write(self.root.join(&file), encode_frame(f))?;
        self.entries.push(FrameEntry { id: f.frame_id.clone(), file });
        Ok(())
    }

    pub fn finish(self) -> Result<Manifest, FrameStoreError> {
        let (intrinsics, dim, provider_id) =
            self.first.ok_or_else(|| FrameStoreError::Manifest("no frames to write".into()))?;
        let manifest = Manifest { version: STORE_VERSION, provider_id, dim, intrinsics, frames: self.entries };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| FrameStoreError::Manifest(e.to_string()))?;
        fs::write(self.root.join(MANIFEST_FILE), json)?;
        Ok(manifest)
    }
}

/// Writes frames sharing one camera and provider into `root`.
pub fn write_store(root: &Path, frames: &[EmbeddingFrame]) -> Result<Manifest, FrameStoreError> {
    if frames.is_empty() {
        return Err(FrameStoreError::Manifest("no frames to write".into()));
    }
    let mut w = StoreWriter::create(root)?;
    for f in frames {
        w.push(f)?;
    }
    w.finish()
}
