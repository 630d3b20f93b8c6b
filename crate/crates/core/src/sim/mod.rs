//! Deterministic grid-world simulator and benchmark: scenes, rendering,
//! the simulated body, episodes and scores.

pub mod bench;
pub mod body;
pub mod metrics;
pub mod render;
pub mod scene;

use std::io;

use thiserror::Error;

use crate::embedding::EmbeddingError;
use crate::map::IntegrationError;
use crate::obstacle::ObstacleError;

pub use bench::{
    generate_suite, run_episode, run_suite, summarize, summary_csv, EpisodeResult, EpisodeStack, GroundTruth,
    PreparedScene, SceneEntry, SceneSource, Subgoal, SubgoalResult, Suite, SuiteReport, SuiteSpec, SummaryRow,
    TaskKind, TaskSpec,
};
pub use body::{step, ActuationNoise, Embodiment, SimBody};
pub use metrics::{compute_spl, independent_sr, seg_metrics, sr_in_a_row, EpisodeOutcome, SegMetrics};
pub use render::{build_gt_topdown, build_scene_map, render_frame, CameraRig, ExploreOptions, RenderedFrame};
pub use scene::{generate_apartment, kitchen_fixture, ApartmentParams, Scene};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scene {0}")]
    Scene(String),
    #[error("{0}")]
    Task(String),
    #[error("invalid episode set: {0}")]
    InvalidEpisode(String),
    #[error("grid shapes differ: prediction has {pred} cells, ground truth {gt}")]
    ShapeMismatch { pred: usize, gt: usize },
    #[error("cell {cell} has label {label}, outside {classes} classes")]
    InvalidLabel { cell: usize, label: u32, classes: usize },
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Obstacle(#[from] ObstacleError),
    #[error(transparent)]
    Io(#[from] io::Error),
}
