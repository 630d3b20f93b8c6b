//! Benchmark scores: success rates, path-length-weighted success and
//! top-down segmentation metrics.

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::index::UNOBSERVED;

/// What the path-weighted score needs from one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub success: bool,
    /// Ground-truth shortest path length, meters.
    pub shortest: f64,
    /// Path the agent actually travelled, meters.
    pub path: f64,
}

/// Mean over episodes of `S * l / max(p, l)`.
pub fn compute_spl(episodes: &[EpisodeOutcome]) -> Result<f64, SimError> {
    if episodes.is_empty() {
        return Err(SimError::InvalidEpisode("no episodes".into()));
    }
    let mut sum = 0.0;
    for (i, e) in episodes.iter().enumerate() {
        if !(e.shortest.is_finite() && e.shortest > 0.0) {
            return Err(SimError::InvalidEpisode(format!("episode {i}: shortest length {} is not positive", e.shortest)));
        }
        if !(e.path.is_finite() && e.path >= 0.0) {
            return Err(SimError::InvalidEpisode(format!("episode {i}: path length {} is invalid", e.path)));
        }
        if e.success {
            sum += e.shortest / e.path.max(e.shortest);
        }
    }
    Ok(sum / episodes.len() as f64)
}

/// Fraction of episodes whose first `k` subgoals all succeeded, over the
/// episodes that have at least `k` subgoals. `None` when there are none.
pub fn sr_in_a_row(flags: &[Vec<bool>], k: usize) -> Option<f64> {
    let eligible: Vec<&Vec<bool>> = flags.iter().filter(|f| f.len() >= k).collect();
    if eligible.is_empty() || k == 0 {
        return None;
    }
    let hit = eligible.iter().filter(|f| f[..k].iter().all(|&s| s)).count();
    Some(hit as f64 / eligible.len() as f64)
}

/// Succeeded subgoals over all subgoals, each counted on its own.
pub fn independent_sr(flags: &[Vec<bool>]) -> Option<f64> {
    let total: usize = flags.iter().map(Vec::len).sum();
    (total > 0).then(|| flags.iter().flatten().filter(|&&s| s).count() as f64 / total as f64)
}

/// Fraction of episodes where every subgoal succeeded.
pub fn success_rate(flags: &[Vec<bool>]) -> Option<f64> {
    (!flags.is_empty()).then(|| flags.iter().filter(|f| f.iter().all(|&s| s)).count() as f64 / flags.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub pixel_acc: f64,
    pub mean_acc: f64,
    #[serde(rename = "mIOU")]
    pub miou: f64,
    #[serde(rename = "fw_mIOU")]
    pub fw_miou: f64,
    /// `None` for classes absent from both grids.
    pub per_class_iou: Vec<Option<f64>>,
    /// Cells counted (observed in both grids).
    pub cells: u64,
    /// Row = ground truth, column = prediction.
    pub confusion: Vec<Vec<u64>>,
}

/// Confusion-matrix metrics over cells observed in both grids.
pub fn seg_metrics(pred: &[u32], gt: &[u32], num_classes: usize) -> Result<SegMetrics, SimError> {
    if pred.len() != gt.len() {
        return Err(SimError::ShapeMismatch { pred: pred.len(), gt: gt.len() });
    }
    let m = num_classes;
    let mut conf = vec![vec![0u64; m]; m];
    for (i, (&p, &g)) in pred.iter().zip(gt).enumerate() {
        if p == UNOBSERVED || g == UNOBSERVED {
            continue;
        }
        if p as usize >= m || g as usize >= m {
            return Err(SimError::InvalidLabel { cell: i, label: p.max(g), classes: m });
        }
        conf[g as usize][p as usize] += 1;
    }
    let total: u64 = conf.iter().flatten().sum();
    if total == 0 {
        return Err(SimError::InvalidEpisode("no cell is observed in both grids".into()));
    }
    let diag: Vec<u64> = (0..m).map(|i| conf[i][i]).collect();
    let gt_count: Vec<u64> = conf.iter().map(|r| r.iter().sum()).collect();
    let pred_count: Vec<u64> = (0..m).map(|j| conf.iter().map(|r| r[j]).sum()).collect();

    let accs: Vec<f64> = (0..m).filter(|&i| gt_count[i] > 0).map(|i| diag[i] as f64 / gt_count[i] as f64).collect();
    let per_class_iou: Vec<Option<f64>> = (0..m)
        .map(|i| {
            let union = gt_count[i] + pred_count[i] - diag[i];
            (union > 0).then(|| diag[i] as f64 / union as f64)
        })
        .collect();
    let present: Vec<f64> = per_class_iou.iter().flatten().copied().collect();
    let fw: f64 = (0..m).filter_map(|i| per_class_iou[i].map(|iou| gt_count[i] as f64 * iou)).sum::<f64>() / total as f64;
    Ok(SegMetrics {
        pixel_acc: diag.iter().sum::<u64>() as f64 / total as f64,
        mean_acc: accs.iter().sum::<f64>() / accs.len() as f64,
        miou: present.iter().sum::<f64>() / present.len() as f64,
        fw_miou: fw,
        per_class_iou,
        cells: total,
        confusion: conf,
    })
}
