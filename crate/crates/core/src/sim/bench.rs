//! Benchmark suites: task specs, the episode runner, suite generation and
//! the summary table.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::body::{ActuationNoise, Embodiment, SimBody};
use super::metrics::{compute_spl, independent_sr, sr_in_a_row, success_rate, EpisodeOutcome};
use super::render::{build_scene_map, ExploreOptions};
use super::scene::{generate_apartment, kitchen_fixture, ApartmentParams, Scene};
use super::SimError;
use crate::embedding::{fnv1a, EmbeddingProvider, LabelSet, SyntheticProvider};
use crate::index::{segment, Mask, SegmentationResult};
use crate::nav::{dijkstra_distances, nearest_free, Action, AgentState, Body, IdealBody, NavConfig, NavContext, Navigator};
use crate::obstacle::{build_obstacle_map, inflate, obstacles_from_segmentation, EmbodimentProfile};
use crate::script::{parse_script, run_script, NavScript, TraceRecord};

pub const SUITE_VERSION: u32 = 1;
/// Number of in-a-row columns in the summary table.
pub const SUMMARY_DEPTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    MultiObject,
    SpatialGoal,
}

/// One step of a task. With a `label` the target is any instance of that
/// category; without one it is wherever the script leads on ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subgoal {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub script: String,
}

fn default_radius() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    pub scene: String,
    pub kind: TaskKind,
    pub start: AgentState,
    pub subgoals: Vec<Subgoal>,
    /// Meters.
    #[serde(default = "default_radius")]
    pub success_radius: f64,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<Vec<NavScript>, SimError> {
        let bad = |m: String| SimError::Task(format!("task {}: {m}", self.id));
        if self.subgoals.is_empty() {
            return Err(bad("no subgoals".into()));
        }
        if !(self.success_radius.is_finite() && self.success_radius > 0.0) {
            return Err(bad(format!("success radius must be positive, got {}", self.success_radius)));
        }
        self.subgoals
            .iter()
            .enumerate()
            .map(|(i, g)| {
                if self.kind == TaskKind::MultiObject && g.label.is_none() {
                    return Err(bad(format!("subgoal {} of a multi-object task needs a label", i + 1)));
                }
                parse_script(&g.script).map_err(|e| bad(format!("subgoal {}: {e}", i + 1)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SceneSource {
    Apartment {
        seed: u64,
        #[serde(default)]
        params: ApartmentParams,
    },
    KitchenFixture,
    /// Scene JSON, relative paths resolved against the suite file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub id: String,
    #[serde(flatten)]
    pub source: SceneSource,
}

impl SceneEntry {
    pub fn load(&self, base: &Path) -> Result<Scene, SimError> {
        let mut s = match &self.source {
            SceneSource::Apartment { seed, params } => generate_apartment(*seed, params)?,
            SceneSource::KitchenFixture => kitchen_fixture(),
            SceneSource::File { path } => Scene::load(&base.join(path))?,
        };
        s.name = self.id.clone();
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSettings {
    /// Actions per episode before it is cut off.
    pub budget: usize,
    pub provider_dim: usize,
    pub provider_seed: u64,
    pub provider_noise: f64,
    pub explore: ExploreOptions,
    pub nav: NavConfig,
    pub noise: ActuationNoise,
    /// Keep per-call traces in the episode results.
    pub record_trace: bool,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            budget: 20_000,
            provider_dim: 32,
            provider_seed: 0,
            provider_noise: 0.0,
            explore: ExploreOptions::default(),
            nav: NavConfig::default(),
            noise: ActuationNoise::default(),
            record_trace: false,
        }
    }
}

impl BenchSettings {
    pub fn provider(&self) -> Result<SyntheticProvider, SimError> {
        Ok(SyntheticProvider::new(self.provider_dim, self.provider_seed)?.with_noise(self.provider_noise))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub version: u32,
    pub name: String,
    /// Embodiment driven through the scene: "ground" or "drone".
    pub body: String,
    /// Maps to compare: "scene" (every non-floor category blocks), "gt"
    /// (ground-truth obstacles), a built-in profile or one from `profiles`.
    pub map_profiles: Vec<String>,
    #[serde(default)]
    pub profiles: Vec<EmbodimentProfile>,
    pub scenes: Vec<SceneEntry>,
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub settings: BenchSettings,
}

impl Suite {
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let s: Suite = serde_json::from_slice(&fs::read(path)?).map_err(|e| SimError::Format(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        fs::write(path, serde_json::to_string_pretty(self).map_err(|e| SimError::Format(e.to_string()))?)?;
        Ok(())
    }

    pub fn embodiment(&self) -> Result<Embodiment, SimError> {
        Embodiment::builtin(&self.body).ok_or_else(|| SimError::Task(format!("unknown body {:?}", self.body)))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.version != SUITE_VERSION {
            return Err(SimError::Format(format!("unsupported suite version {}", self.version)));
        }
        self.embodiment()?;
        if self.map_profiles.is_empty() {
            return Err(SimError::Task("no map profiles".into()));
        }
        for p in &self.profiles {
            p.validate()?;
        }
        for m in &self.map_profiles {
            let known = m == "scene" || m == "gt" || self.profiles.iter().any(|p| &p.name == m);
            if !known && EmbodimentProfile::builtin(m).is_none() {
                return Err(SimError::Task(format!("unknown map profile {m:?}")));
            }
        }
        let mut ids = std::collections::HashSet::new();
        for s in &self.scenes {
            if !ids.insert(&s.id) {
                return Err(SimError::Task(format!("duplicate scene id {:?}", s.id)));
            }
        }
        let mut tids = std::collections::HashSet::new();
        for t in &self.tasks {
            if !ids.contains(&t.scene) {
                return Err(SimError::Task(format!("task {} refers to unknown scene {:?}", t.id, t.scene)));
            }
            if !tids.insert(&t.id) {
                return Err(SimError::Task(format!("duplicate task id {:?}", t.id)));
            }
            t.validate()?;
        }
        Ok(())
    }

    fn profile(&self, name: &str) -> Option<EmbodimentProfile> {
        self.profiles.iter().find(|p| p.name == name).cloned().or_else(|| EmbodimentProfile::builtin(name))
    }
}

/// Ground-truth side of a scene for one embodiment.
pub struct GroundTruth {
    pub scene: Scene,
    pub labels: LabelSet,
    pub segmentation: SegmentationResult,
    /// Cells the body bumps into.
    pub blocked: Mask,
    /// `blocked` inflated by the body radius: the space shortest paths use.
    pub travel: Mask,
}

impl GroundTruth {
    pub fn new(scene: Scene, body: &Embodiment) -> Self {
        let blocked = body.blocked(&scene);
        let travel = inflate(&blocked, body.inflation_cells(scene.scale as f64));
        Self { labels: scene.label_set(), segmentation: scene.segmentation(), blocked, travel, scene }
    }

    pub fn context(&self) -> NavContext<'_> {
        NavContext {
            grid: self.scene.grid(),
            segmentation: &self.segmentation,
            labels: &self.labels,
            obstacles: &self.travel,
        }
    }

    fn radius_cells(&self, meters: f64) -> f64 {
        meters / self.scene.scale as f64
    }

    /// Distance in cells from the agent to the nearest cell of `label`.
    pub fn distance_to_label(&self, state: &AgentState, label: &str) -> Option<f64> {
        let idx = self.scene.label_index(label)?;
        let cols = self.scene.cols;
        self.scene
            .label_grid
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == idx)
            .map(|(i, _)| state.distance_to((i / cols) as f64, (i % cols) as f64))
            .min_by(f64::total_cmp)
    }

    /// Meters along the shortest 8-connected free path from `start` to any
    /// cell of `region`; straight-line distance when none is reachable.
    pub fn shortest_to(&self, start: &AgentState, region: &Mask) -> f64 {
        let s = self.scene.scale as f64;
        let grid = self.scene.grid();
        let cell = start.cell(&grid);
        if region.get(cell) {
            return 0.0;
        }
        let source = if self.travel.get(cell) { nearest_free(&self.travel, cell, 20) } else { Some(cell) };
        if let Some(src) = source {
            let d = dijkstra_distances(&self.travel, &[src]);
            let best = region.cells().filter_map(|c| d[grid.index(c)]).min();
            if let Some(c) = best {
                return c.value() * s;
            }
        }
        region.cells().map(|c| start.distance_to(c.px as f64, c.py as f64)).fold(f64::INFINITY, f64::min) * s
    }

    /// Cells within `radius` meters of any cell in `target`.
    pub fn success_region(&self, target: &Mask, radius: f64) -> Mask {
        inflate(target, self.radius_cells(radius).floor() as usize)
    }

    fn point_mask(&self, px: f64, py: f64) -> Mask {
        let mut m = Mask::new(self.scene.rows, self.scene.cols);
        let c = AgentState::new(px, py, 0.0).cell(&self.scene.grid());
        m.set(c, true);
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub success: bool,
    /// Meters travelled for this subgoal.
    pub path_length: f64,
    /// Ground-truth shortest length from where the subgoal started, meters.
    pub shortest_length: f64,
    /// Distance from the stop position to the target, meters.
    pub distance: f64,
    pub actions: usize,
    pub start: AgentState,
    pub stop: AgentState,
    /// Ground-truth end point of a spatial subgoal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<AgentState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgoalTrace {
    pub subgoal: usize,
    #[serde(flatten)]
    pub record: TraceRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub task_id: String,
    pub scene: String,
    pub kind: TaskKind,
    pub map_profile: String,
    pub body: String,
    pub subgoals: Vec<SubgoalResult>,
    pub success: Vec<bool>,
    pub path_length: f64,
    pub shortest_length: f64,
    pub actions: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<SubgoalTrace>,
}

impl EpisodeResult {
    /// The episode succeeds when every subgoal does; lengths are summed.
    pub fn outcome(&self) -> EpisodeOutcome {
        EpisodeOutcome {
            success: self.success.iter().all(|&s| s),
            shortest: self.shortest_length,
            path: self.path_length,
        }
    }
}

/// Everything an episode reads.
pub struct EpisodeStack<'a> {
    pub truth: &'a GroundTruth,
    pub map: NavContext<'a>,
    pub map_profile: &'a str,
    pub body: &'a Embodiment,
    pub settings: &'a BenchSettings,
}

/// Ground-truth end point of a script started from `start`.
pub fn spatial_target(truth: &GroundTruth, script: &NavScript, start: AgentState, nav: &NavConfig) -> (AgentState, Option<String>) {
    let mut navigator = Navigator::new(truth.context(), *nav);
    let mut body = IdealBody::new(start, truth.scene.grid().scale);
    let run = run_script(script, &mut navigator, &mut body);
    (body.state, run.error.map(|e| e.to_string()))
}

/// Runs the task's scripts in order on the map stack, issuing STOP after
/// each, and scores every subgoal against the ground truth.
pub fn run_episode(stack: &EpisodeStack<'_>, task: &TaskSpec) -> Result<EpisodeResult, SimError> {
    let scripts = task.validate()?;
    let truth = stack.truth;
    let scale = truth.scene.grid().scale;
    let noise = ActuationNoise { seed: stack.settings.noise.seed ^ fnv1a(task.id.as_bytes()), ..stack.settings.noise };
    let mut body = SimBody::with_noise(truth.blocked.clone(), scale, task.start, stack.settings.budget, noise);
    let mut navigator = Navigator::new(stack.map, stack.settings.nav);
    let mut subgoals = Vec::with_capacity(task.subgoals.len());
    let mut trace = Vec::new();
    let radius_cells = truth.radius_cells(task.success_radius);
    for (i, (goal, script)) in task.subgoals.iter().zip(&scripts).enumerate() {
        let start = body.state();
        let (forwards0, actions0) = (body.forward_count(), body.actions().len());
        let error = if body.remaining() == 0 {
            Some(format!("action budget of {} exhausted", stack.settings.budget))
        } else {
            let run = run_script(script, &mut navigator, &mut body);
            if stack.settings.record_trace {
                trace.extend(run.trace.into_iter().map(|record| SubgoalTrace { subgoal: i, record }));
            }
            let mut error = run.error.map(|e| e.to_string());
            if let Err(e) = body.act(Action::Stop) {
                error.get_or_insert(e.to_string());
            }
            error
        };
        let stop = body.state();
        let (region, distance, target) = match &goal.label {
            Some(label) => {
                let idx = truth.scene.label_index(label);
                let mask = match idx {
                    Some(l) => truth.scene.label_mask(l),
                    None => Mask::new(truth.scene.rows, truth.scene.cols),
                };
                let d = truth.distance_to_label(&stop, label).unwrap_or(f64::INFINITY);
                (truth.success_region(&mask, task.success_radius), d, None)
            }
            None => {
                let (t, _) = spatial_target(truth, script, start, &stack.settings.nav);
                let m = truth.point_mask(t.px, t.py);
                (truth.success_region(&m, task.success_radius), stop.distance_to(t.px, t.py), Some(t))
            }
        };
        let reachable = Mask {
            rows: region.rows,
            cols: region.cols,
            data: region.data.iter().zip(&truth.travel.data).map(|(&r, &b)| r && !b).collect(),
        };
        let shortest = truth.shortest_to(&start, if reachable.count() > 0 { &reachable } else { &region });
        let budget_hit = error.as_deref().is_some_and(|e| e.contains("budget"));
        subgoals.push(SubgoalResult {
            label: goal.label.clone(),
            success: !budget_hit && distance <= radius_cells,
            path_length: 0.05 * (body.forward_count() - forwards0) as f64,
            shortest_length: shortest,
            distance: distance * truth.scene.scale as f64,
            actions: body.actions().len() - actions0,
            start,
            stop,
            target,
            error,
        });
    }
    Ok(EpisodeResult {
        task_id: task.id.clone(),
        scene: task.scene.clone(),
        kind: task.kind,
        map_profile: stack.map_profile.to_string(),
        body: stack.body.name.clone(),
        success: subgoals.iter().map(|s| s.success).collect(),
        path_length: body.path_length(),
        shortest_length: subgoals.iter().map(|s| s.shortest_length).sum(),
        actions: body.actions().len(),
        subgoals,
        trace,
    })
}

/// A scene with its built map and the map-side segmentation.
pub struct PreparedScene {
    pub truth: GroundTruth,
    pub map: crate::map::VLMap,
    pub segmentation: SegmentationResult,
}

impl PreparedScene {
    pub fn build(scene: Scene, body: &Embodiment, settings: &BenchSettings, provider: &SyntheticProvider) -> Result<Self, SimError> {
        let built = build_scene_map(&scene, provider, &settings.explore)?;
        let e = provider.embed_labels(&scene.label_set())?;
        let segmentation = segment(&built.map, &e).map_err(|e| SimError::Scene(e.to_string()))?;
        Ok(Self { truth: GroundTruth::new(scene, body), map: built.map, segmentation })
    }

    /// Planning obstacles for a map profile, inflated by the body radius.
    pub fn obstacles(
        &self,
        profile: &str,
        custom: Option<&EmbodimentProfile>,
        body: &Embodiment,
        provider: &SyntheticProvider,
    ) -> Result<Mask, SimError> {
        let scene = &self.truth.scene;
        let raw = match (profile, custom) {
            ("gt", _) => return Ok(self.truth.travel.clone()),
            ("scene", _) => {
                let blocking: Vec<usize> = (1..scene.labels.len()).collect();
                obstacles_from_segmentation(&self.segmentation, self.map.occupancy(), &blocking)
            }
            (_, Some(p)) => build_obstacle_map(&self.map, p, provider)?.blocked,
            (name, None) => return Err(SimError::Task(format!("unknown map profile {name:?}"))),
        };
        Ok(inflate(&raw, body.inflation_cells(scene.scale as f64)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub map_profile: String,
    pub body: String,
    pub episodes: usize,
    pub sr_in_a_row: Vec<Option<f64>>,
    pub independent_sr: Option<f64>,
    pub success_rate: Option<f64>,
    pub spl: Option<f64>,
}

pub fn summarize(results: &[EpisodeResult]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String), Vec<&EpisodeResult>> = BTreeMap::new();
    for r in results {
        groups.entry((r.map_profile.clone(), r.body.clone())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((map_profile, body), rs)| {
            let flags: Vec<Vec<bool>> = rs.iter().map(|r| r.success.clone()).collect();
            let outcomes: Vec<EpisodeOutcome> = rs.iter().map(|r| r.outcome()).collect();
            SummaryRow {
                map_profile,
                body,
                episodes: rs.len(),
                sr_in_a_row: (1..=SUMMARY_DEPTH).map(|k| sr_in_a_row(&flags, k)).collect(),
                independent_sr: independent_sr(&flags),
                success_rate: success_rate(&flags),
                spl: compute_spl(&outcomes).ok(),
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let mut out = String::from("map_profile,body,episodes");
    for k in 1..=SUMMARY_DEPTH {
        out.push_str(&format!(",sr_{k}"));
    }
    out.push_str(",independent_sr,success_rate,spl\n");
    for r in rows {
        out.push_str(&format!("{},{},{}", r.map_profile, r.body, r.episodes));
        for v in &r.sr_in_a_row {
            out.push(',');
            out.push_str(&f(*v));
        }
        out.push_str(&format!(",{},{},{}\n", f(r.independent_sr), f(r.success_rate), f(r.spl)));
    }
    out
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub results: Vec<EpisodeResult>,
    pub summary: Vec<SummaryRow>,
}

impl SuiteReport {
    pub fn jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            out.push_str(&serde_json::to_string(r).expect("results serialize"));
            out.push('\n');
        }
        out
    }
}

/// Builds every scene's map once, then runs each task under each map
/// profile on `jobs` worker threads. Results are ordered by task id and
/// profile, independent of scheduling.
pub fn run_suite(suite: &Suite, base: &Path, jobs: usize) -> Result<SuiteReport, SimError> {
    suite.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SimError::Task(e.to_string()))?;
    pool.install(|| run_suite_inner(suite, base))
}

fn run_suite_inner(suite: &Suite, base: &Path) -> Result<SuiteReport, SimError> {
    let body = suite.embodiment()?;
    let provider = suite.settings.provider()?;
    let mut prepared = BTreeMap::new();
    for entry in &suite.scenes {
        if suite.tasks.iter().any(|t| t.scene == entry.id) {
            let scene = entry.load(base)?;
            prepared.insert(entry.id.clone(), PreparedScene::build(scene, &body, &suite.settings, &provider)?);
        }
    }
    let mut obstacles = BTreeMap::new();
    for (id, p) in &prepared {
        for m in &suite.map_profiles {
            let custom = suite.profile(m);
            obstacles.insert((id.clone(), m.clone()), p.obstacles(m, custom.as_ref(), &body, &provider)?);
        }
    }
    let jobs: Vec<(&TaskSpec, &String)> =
        suite.tasks.iter().flat_map(|t| suite.map_profiles.iter().map(move |m| (t, m))).collect();
    let mut results = jobs
        .par_iter()
        .map(|(task, profile)| {
            let p = &prepared[&task.scene];
            let stack = EpisodeStack {
                truth: &p.truth,
                map: NavContext {
                    grid: p.truth.scene.grid(),
                    segmentation: &p.segmentation,
                    labels: &p.truth.labels,
                    obstacles: &obstacles[&(task.scene.clone(), (*profile).clone())],
                },
                map_profile: profile,
                body: &body,
                settings: &suite.settings,
            };
            run_episode(&stack, task)
        })
        .collect::<Result<Vec<_>, _>>()?;
    results.sort_by(|a, b| (&a.task_id, &a.map_profile).cmp(&(&b.task_id, &b.map_profile)));
    let summary = summarize(&results);
    Ok(SuiteReport { results, summary })
}

/// Settings for a generated suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteSpec {
    pub name: String,
    pub seed: u64,
    pub scenes: usize,
    pub multi_object_per_scene: usize,
    pub spatial_per_scene: usize,
    pub subgoals: usize,
    pub apartment: ApartmentParams,
    pub body: String,
    pub map_profiles: Vec<String>,
    pub settings: BenchSettings,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            name: "apartments".into(),
            seed: 0,
            scenes: 5,
            multi_object_per_scene: 18,
            spatial_per_scene: 4,
            subgoals: 4,
            apartment: ApartmentParams::default(),
            body: "ground".into(),
            map_profiles: vec!["scene".into()],
            settings: BenchSettings::default(),
        }
    }
}

impl SuiteSpec {
    /// Drone flying through open-plan apartments, compared on a ground
    /// robot's map and on its own.
    pub fn cross_embodiment(scenes: usize, seed: u64) -> Self {
        Self {
            name: "cross-embodiment".into(),
            seed,
            scenes,
            multi_object_per_scene: 3,
            spatial_per_scene: 0,
            apartment: ApartmentParams::open_plan(),
            body: "drone".into(),
            map_profiles: vec!["locobot".into(), "drone".into()],
            ..Self::default()
        }
    }
}

/// Categories used as navigation targets: everything but structure.
fn target_categories(scene: &Scene) -> Vec<String> {
    scene.inventory().into_keys().filter(|k| k != "wall" && k != "window").collect()
}

fn random_free(truth: &GroundTruth, rng: &mut ChaCha8Rng) -> Option<AgentState> {
    let free: Vec<usize> = (0..truth.travel.data.len()).filter(|&i| !truth.travel.data[i]).collect();
    let i = *free.choose(rng)?;
    let c = truth.scene.grid().coord(i);
    Some(AgentState::at_cell(c, rng.random_range(-179..=180) as f64))
}

/// Checks a task on the ground-truth stack: every subgoal must be reached by
/// its own script, and must not already hold where it starts.
fn feasible(truth: &GroundTruth, task: &TaskSpec, nav: &NavConfig) -> bool {
    let Ok(scripts) = task.validate() else { return false };
    let r = truth.radius_cells(task.success_radius);
    let mut state = task.start;
    let mut navigator = Navigator::new(truth.context(), *nav);
    for (goal, script) in task.subgoals.iter().zip(&scripts) {
        let before = state;
        let mut body = IdealBody::new(state, truth.scene.grid().scale);
        let run = run_script(script, &mut navigator, &mut body);
        if !run.is_ok() {
            return false;
        }
        state = body.state;
        let ok = match &goal.label {
            Some(l) => {
                truth.distance_to_label(&before, l).is_some_and(|d| d > 1.5 * r)
                    && truth.distance_to_label(&state, l).is_some_and(|d| d <= r)
            }
            None => before.distance_to(state.px, state.py) > 1.5 * r,
        };
        let spatial_blocked = goal.label.is_none() && truth.travel.get(state.cell(&truth.scene.grid()));
        if !ok || spatial_blocked {
            return false;
        }
    }
    true
}

fn multi_object_task(truth: &GroundTruth, cats: &[String], n: usize, rng: &mut ChaCha8Rng) -> Option<TaskSpec> {
    let mut seq: Vec<String> = Vec::with_capacity(n);
    for _ in 0..n {
        let options: Vec<&String> = cats.iter().filter(|c| seq.last() != Some(*c)).collect();
        seq.push((*options.choose(rng)?).clone());
    }
    Some(TaskSpec {
        id: String::new(),
        scene: truth.scene.name.clone(),
        kind: TaskKind::MultiObject,
        start: random_free(truth, rng)?,
        subgoals: seq
            .into_iter()
            .map(|c| Subgoal { script: format!("robot.move_to_object('{c}')"), label: Some(c) })
            .collect(),
        success_radius: 1.0,
    })
}

const SPATIAL_TEMPLATES: &[&str] = &[
    "robot.move_to_left('{a}')",
    "robot.move_to_right('{a}')",
    "robot.move_in_between('{a}', '{b}')",
    "robot.move_north('{a}')",
    "robot.move_south('{a}')",
    "robot.move_east('{a}')",
    "robot.move_west('{a}')",
    "robot.move_to_object('{a}')\nrobot.face('{b}')\nrobot.move_forward(1)",
    "robot.move_to_object('{a}')\nrobot.turn(180)\nrobot.move_forward(1.5)",
    "pos = robot.get_pos('{a}')\nrobot.move_to(pos)\nrobot.turn_absolute(90)\nrobot.move_forward(1)",
    "robot.move_to_object('{a}')\nrobot.with_object_on_left('{a}')\nrobot.move_forward(1)",
];

fn spatial_task(truth: &GroundTruth, cats: &[String], n: usize, rng: &mut ChaCha8Rng) -> Option<TaskSpec> {
    let subgoals = (0..n)
        .map(|_| {
            let a = cats.choose(rng)?;
            let others: Vec<&String> = cats.iter().filter(|c| *c != a).collect();
            let b = others.choose(rng).copied().unwrap_or(a);
            let t = SPATIAL_TEMPLATES.choose(rng)?;
            Some(Subgoal { label: None, script: t.replace("{a}", a).replace("{b}", b) })
        })
        .collect::<Option<Vec<_>>>()?;
    Some(TaskSpec {
        id: String::new(),
        scene: truth.scene.name.clone(),
        kind: TaskKind::SpatialGoal,
        start: random_free(truth, rng)?,
        subgoals,
        success_radius: 1.0,
    })
}

/// Seeded apartments with tasks that are known to be solvable on ground
/// truth.
pub fn generate_suite(spec: &SuiteSpec) -> Result<Suite, SimError> {
    let body = Embodiment::builtin(&spec.body).ok_or_else(|| SimError::Task(format!("unknown body {:?}", spec.body)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut scenes = Vec::new();
    let mut tasks = Vec::new();
    for k in 0..spec.scenes {
        let seed = rng.random::<u32>() as u64;
        let entry = SceneEntry {
            id: format!("scene-{k:03}"),
            source: SceneSource::Apartment { seed, params: spec.apartment.clone() },
        };
        let truth = GroundTruth::new(entry.load(Path::new("."))?, &body);
        let cats = target_categories(&truth.scene);
        let mut make = |kind: TaskKind, count: usize, tasks: &mut Vec<TaskSpec>| {
            let mut made = 0;
            for _attempt in 0..count * 40 {
                if made == count {
                    break;
                }
                let t = match kind {
                    TaskKind::MultiObject => multi_object_task(&truth, &cats, spec.subgoals, &mut rng),
                    TaskKind::SpatialGoal => spatial_task(&truth, &cats, spec.subgoals, &mut rng),
                };
                let Some(mut t) = t else { break };
                let prefix = if kind == TaskKind::MultiObject { "mo" } else { "sg" };
                t.id = format!("{}-{prefix}-{made:02}", entry.id);
                if feasible(&truth, &t, &spec.settings.nav) {
                    tasks.push(t);
                    made += 1;
                }
            }
        };
        make(TaskKind::MultiObject, spec.multi_object_per_scene, &mut tasks);
        make(TaskKind::SpatialGoal, spec.spatial_per_scene, &mut tasks);
        scenes.push(entry);
    }
    let suite = Suite {
        version: SUITE_VERSION,
        name: spec.name.clone(),
        body: spec.body.clone(),
        map_profiles: spec.map_profiles.clone(),
        profiles: Vec::new(),
        scenes,
        tasks,
        settings: spec.settings.clone(),
    };
    suite.validate()?;
    Ok(suite)
}
