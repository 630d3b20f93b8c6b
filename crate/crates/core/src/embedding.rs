//! Per-pixel image embeddings and per-label text embeddings.
//!
//! [`SyntheticProvider`] is the deterministic stand-in for a visual-language
//! model: every vocabulary word owns one row of a seeded random orthonormal
//! basis and image pixels carry their label as an RGB code. Argmax indexing of
//! anything it produces is exact, which makes it the pipeline's oracle.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub const MATRIX_MAGIC: &[u8; 4] = b"VLME";

/// Categories known to the synthetic provider, in prototype order.
pub const DEFAULT_VOCABULARY: &[&str] = &[
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
    "stairs",
    "ceiling lights",
    "counter support",
    "wall above the door",
    "other",
];

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("label set is empty")]
    EmptyLabelSet,
    #[error("invalid label {0:?}")]
    InvalidLabel(String),
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("pixel ({x}, {y}) has color {color:?} which encodes no known label")]
    UnknownPixelColor { x: u32, y: u32, color: [u8; 3] },
    #[error("{0} is not supported by provider {1}")]
    Unsupported(&'static str, String),
    #[error("embedding matrix file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Ordered, unique, non-empty category names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<String>,
}

impl LabelSet {
    pub fn new<I, S>(labels: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(EmbeddingError::EmptyLabelSet);
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if l.trim().is_empty() {
                return Err(EmbeddingError::InvalidLabel(l.clone()));
            }
            if !seen.insert(l.as_str()) {
                return Err(EmbeddingError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// Parses a comma-separated list, trimming whitespace around each entry.
    pub fn parse_list(s: &str) -> Result<Self, EmbeddingError> {
        Self::new(s.split(',').map(|l| l.trim().to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&str> {
        self.labels.get(i).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }

    pub fn as_slice(&self) -> &[String] {
        &self.labels
    }
}

/// `M x C` text embeddings, one row per label.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self, EmbeddingError> {
        if rows == 0 || dim == 0 || data.len() != rows * dim {
            return Err(EmbeddingError::Config(format!(
                "matrix data of length {} does not match {rows}x{dim}",
                data.len()
            )));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Multiplies every row by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        Self { rows: self.rows, dim: self.dim, data: self.data.iter().map(|v| v * factor).collect() }
    }

    /// Rows reordered so that new row `i` is old row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: order.len(), dim: self.dim, data }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.data.len() * 4);
        out.extend_from_slice(MATRIX_MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        if bytes.len() < 12 || &bytes[..4] != MATRIX_MAGIC {
            return Err(EmbeddingError::Format("bad magic".into()));
        }
        let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let payload = &bytes[12..];
        if payload.len() != rows * dim * 4 {
            return Err(EmbeddingError::Format(format!(
                "expected {} payload bytes for {rows}x{dim}, found {}",
                rows * dim * 4,
                payload.len()
            )));
        }
        let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Self::new(rows, dim, data)
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbeddingError> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        Self { width, height, data: vec![color; (width * height) as usize] }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.data[(y * self.width + x) as usize]
    }
}

/// `H x W x C` per-pixel embeddings, C innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelEmbeddings {
    pub width: u32,
    pub height: u32,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl PixelEmbeddings {
    pub fn pixel(&self, x: u32, y: u32) -> &[f32] {
        let i = (y * self.width + x) as usize * self.dim;
        &self.data[i..i + self.dim]
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;

    fn dim(&self) -> usize;

    fn embed_image(&self, image: &RgbImage) -> Result<PixelEmbeddings, EmbeddingError>;

    fn embed_labels(&self, labels: &LabelSet) -> Result<EmbeddingMatrix, EmbeddingError>;
}

/// Scales `v` to unit L2 norm; zero vectors are left untouched.
pub fn normalize(v: &mut [f32]) {
    let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (*x as f64 / norm) as f32;
        }
    }
}

pub fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt()
}

/// Mean of per-template embeddings, renormalized.
pub fn prompt_ensemble(templates: &[Vec<f32>]) -> Result<Vec<f32>, EmbeddingError> {
    let first = templates.first().ok_or_else(|| EmbeddingError::Config("no templates".into()))?;
    let dim = first.len();
    let mut acc = vec![0f64; dim];
    for t in templates {
        if t.len() != dim {
            return Err(EmbeddingError::Config("template embeddings differ in dimension".into()));
        }
        for (a, v) in acc.iter_mut().zip(t) {
            *a += *v as f64;
        }
    }
    let mut out: Vec<f32> = acc.iter().map(|a| (a / templates.len() as f64) as f32).collect();
    normalize(&mut out);
    Ok(out)
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    id: String,
    dim: usize,
    seed: u64,
    noise_sigma: f64,
    vocabulary: Vec<String>,
    basis: Vec<f32>,
}

impl SyntheticProvider {
    pub fn new(dim: usize, seed: u64) -> Result<Self, EmbeddingError> {
        Self::with_vocabulary(dim, seed, DEFAULT_VOCABULARY.iter().map(|s| s.to_string()).collect())
    }

    pub fn with_vocabulary(dim: usize, seed: u64, vocabulary: Vec<String>) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::Config("dimension must be positive".into()));
        }
        if vocabulary.len() > dim {
            return Err(EmbeddingError::Config(format!(
                "{} vocabulary words need at least as many dimensions, got {dim}",
                vocabulary.len()
            )));
        }
        if vocabulary.len() > u16::MAX as usize {
            return Err(EmbeddingError::Config("vocabulary too large for the pixel label code".into()));
        }
        LabelSet::new(vocabulary.iter().cloned())?;
        Ok(Self {
            id: format!("synthetic:c{dim}:s{seed}"),
            dim,
            seed,
            noise_sigma: 0.0,
            basis: orthonormal_basis(dim, seed),
            vocabulary,
        })
    }

    /// Reconstructs a default-vocabulary provider from its id string.
    pub fn from_id(id: &str) -> Result<Self, EmbeddingError> {
        let bad = || EmbeddingError::Config(format!("not a synthetic provider id: {id:?}"));
        let rest = id.strip_prefix("synthetic:c").ok_or_else(bad)?;
        let (dim, seed) = rest.split_once(":s").ok_or_else(bad)?;
        Self::new(dim.parse().map_err(|_| bad())?, seed.parse().map_err(|_| bad())?)
    }

    /// Adds seeded Gaussian noise of standard deviation `sigma` per component
    /// before renormalizing each pixel.
    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma.max(0.0);
        self
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn vocabulary_index(&self, label: &str) -> Option<usize> {
        self.vocabulary.iter().position(|v| v == label)
    }

    pub fn prototype(&self, index: usize) -> &[f32] {
        &self.basis[index * self.dim..(index + 1) * self.dim]
    }

    /// RGB code of vocabulary entry `index`.
    pub fn label_color(index: usize) -> [u8; 3] {
        [(index & 0xff) as u8, ((index >> 8) & 0xff) as u8, 0x80]
    }

    pub fn decode_color(&self, color: [u8; 3]) -> Option<usize> {
        if color[2] != 0x80 {
            return None;
        }
        let index = color[0] as usize | (color[1] as usize) << 8;
        (index < self.vocabulary.len()).then_some(index)
    }

    /// Text embedding of an arbitrary string: its prototype when it is a
    /// vocabulary word, otherwise a seeded hash direction.
    pub fn text_embedding(&self, label: &str) -> Vec<f32> {
        if let Some(i) = self.vocabulary_index(label) {
            return self.prototype(i).to_vec();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(label.as_bytes()));
        let mut v: Vec<f32> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).map(|x: f64| x as f32).collect();
        normalize(&mut v);
        v
    }

    /// Embeds an image with an explicit noise stream.
    pub fn embed_image_with_stream(&self, image: &RgbImage, stream: u64) -> Result<PixelEmbeddings, EmbeddingError> {
        let n = (image.width * image.height) as usize;
        if image.data.len() != n {
            return Err(EmbeddingError::Config("image data does not match its dimensions".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.rotate_left(17) ^ stream);
        let mut data = Vec::with_capacity(n * self.dim);
        for (i, color) in image.data.iter().enumerate() {
            let label = self.decode_color(*color).ok_or(EmbeddingError::UnknownPixelColor {
                x: i as u32 % image.width,
                y: i as u32 / image.width,
                color: *color,
            })?;
            let start = data.len();
            data.extend_from_slice(self.prototype(label));
            if self.noise_sigma > 0.0 {
                for v in &mut data[start..] {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    *v += (e * self.noise_sigma) as f32;
                }
                normalize(&mut data[start..]);
            }
        }
        Ok(PixelEmbeddings { width: image.width, height: image.height, dim: self.dim, data })
    }
}

impl EmbeddingProvider for SyntheticProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image(&self, image: &RgbImage) -> Result<PixelEmbeddings, EmbeddingError> {
        let bytes: Vec<u8> = image.data.iter().flatten().copied().collect();
        self.embed_image_with_stream(image, fnv1a(&bytes))
    }

    fn embed_labels(&self, labels: &LabelSet) -> Result<EmbeddingMatrix, EmbeddingError> {
        let mut data = Vec::with_capacity(labels.len() * self.dim);
        for l in labels.iter() {
            data.extend(self.text_embedding(l));
        }
        EmbeddingMatrix::new(labels.len(), self.dim, data)
    }
}

/// Row `i` of the returned `dim x dim` matrix is the `i`-th basis vector,
/// from Gram-Schmidt over a seeded Gaussian matrix.
fn orthonormal_basis(dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = (0..dim).map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    for i in 0..dim {
        // two passes keep the f64 residual orthogonality near machine precision
        for _ in 0..2 {
            for j in 0..i {
                let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = rows.split_at_mut(i);
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    *a -= dot * b;
                }
            }
        }
        let norm = rows[i].iter().map(|a| a * a).sum::<f64>().sqrt();
        rows[i].iter_mut().for_each(|a| *a /= norm);
    }
    rows.into_iter().flatten().map(|v| v as f32).collect()
}

/// Serves precomputed embeddings: frames come from a frame store and text
/// embeddings from a `VLME` matrix file written by an external encoder.
#[derive(Debug, Clone)]
pub struct FileProvider {
    id: String,
    dim: usize,
    matrix_path: Option<PathBuf>,
}

impl FileProvider {
    pub fn new(id: impl Into<String>, dim: usize, matrix_path: Option<PathBuf>) -> Self {
        Self { id: id.into(), dim, matrix_path }
    }
}

impl EmbeddingProvider for FileProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image(&self, _image: &RgbImage) -> Result<PixelEmbeddings, EmbeddingError> {
        Err(EmbeddingError::Unsupported("embed_image", self.id.clone()))
    }

    fn embed_labels(&self, labels: &LabelSet) -> Result<EmbeddingMatrix, EmbeddingError> {
        let path = self
            .matrix_path
            .as_ref()
            .ok_or_else(|| EmbeddingError::Config("file provider needs a label embedding matrix".into()))?;
        let m = EmbeddingMatrix::load(path)?;
        if m.rows() != labels.len() || m.dim() != self.dim {
            return Err(EmbeddingError::Config(format!(
                "matrix {} is {}x{}, expected {}x{}",
                path.display(),
                m.rows(),
                m.dim(),
                labels.len(),
                self.dim
            )));
        }
        Ok(m)
    }
}
