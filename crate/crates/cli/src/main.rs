use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use vlmap::config::{ConfigError, RunConfig, CONFIG_ENV};
use vlmap::embedding::{EmbeddingError, LabelSet, SyntheticProvider};
use vlmap::frames::{FrameStore, FrameStoreError, StoreWriter};
use vlmap::geometry::GridCoord;
use vlmap::index::{legend, read_label_png, segment, write_label_png, IndexError, Mask, UNOBSERVED};
use vlmap::map::{MapFormatError, VLMap};
use vlmap::nav::{format_actions, path_to_actions, plan_path, AgentState, IdealBody, NavContext, Navigator};
use vlmap::obstacle::{build_obstacle_map, inflate, read_pgm, write_pgm, ObstacleError, ObstacleSidecar};
use vlmap::script::{parse_script, run_script};
use vlmap::sim::render::{exploration_views, render_views, TopDownLabels};
use vlmap::sim::{
    generate_apartment, generate_suite, kitchen_fixture, run_suite, seg_metrics, summary_csv, ApartmentParams, Scene,
    SimError, Suite, SuiteSpec,
};

#[derive(Parser)]
#[command(name = "vlmap", version, about = "Build visual-language grid maps, index landmarks, plan and run navigation scripts")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Print a machine-readable JSON object instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse a frame store into a map file.
    Build {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Grid rows; overrides the config.
        #[arg(long)]
        rows: Option<usize>,
        /// Grid columns; overrides the config.
        #[arg(long)]
        cols: Option<usize>,
        /// Meters per cell; overrides the config.
        #[arg(long)]
        scale: Option<f32>,
    },
    /// Label every observed cell with the best matching query and write a PNG.
    Index {
        #[arg(long)]
        map: PathBuf,
        /// Comma-separated query labels.
        #[arg(long)]
        labels: String,
        #[arg(long)]
        out: PathBuf,
        /// Legend JSON; defaults to the PNG path with a .json extension.
        #[arg(long)]
        legend: Option<PathBuf>,
    },
    /// Write an embodiment's inflated obstacle map as PGM plus a JSON sidecar.
    Obstacles {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        profile: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Shortest path between two cells.
    Plan {
        #[command(flatten)]
        stack: StackArgs,
        /// Start cell "px,py".
        #[arg(long)]
        start: String,
        /// Goal cell "px,py".
        #[arg(long)]
        goal: String,
        /// Starting heading in degrees (0 = north, 90 = east).
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        heading: f64,
        /// Write the action sequence, one code per line.
        #[arg(long)]
        actions: Option<PathBuf>,
    },
    /// Run a navigation script on a map and print the JSONL trace.
    Exec {
        #[command(flatten)]
        stack: StackArgs,
        #[arg(long)]
        script: PathBuf,
        /// Start "px,py" or "px,py,heading".
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        /// Landmark vocabulary; defaults to the synthetic provider's.
        #[arg(long)]
        labels: Option<String>,
        /// Write the trace here instead of stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        actions: Option<PathBuf>,
    },
    /// Run a benchmark suite and print the summary table.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        /// Directory for results.jsonl and summary.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segmentation metrics between two label PNGs.
    EvalSeg {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Number of classes; defaults to one more than the largest label seen.
        #[arg(long)]
        classes: Option<usize>,
    },
    /// Synthetic scenes, frame stores and suites.
    #[command(subcommand)]
    Synth(Synth),
}

#[derive(Args)]
struct StackArgs {
    #[arg(long)]
    map: PathBuf,
    /// Embodiment profile used to derive obstacles from the map.
    #[arg(long, conflicts_with = "obstacles", required_unless_present = "obstacles")]
    profile: Option<String>,
    /// Precomputed obstacle PGM, used as is.
    #[arg(long)]
    obstacles: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneKind {
    Apartment,
    OpenPlan,
    Kitchen,
}

#[derive(Subcommand)]
enum Synth {
    /// Generate a scene JSON file.
    Scene {
        #[arg(long, value_enum, default_value = "apartment")]
        kind: SceneKind,
        /// Grid side length in cells.
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an exploration pass over a scene into a frame store.
    Frames {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Meters between camera stops.
        #[arg(long, default_value_t = 0.8)]
        spacing: f64,
        /// Also write the ground-truth top-down labels (scene label order).
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Generate a benchmark suite of seeded apartments.
    Suite {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        scenes: usize,
        #[arg(long, default_value_t = 18)]
        multi_object: usize,
        #[arg(long, default_value_t = 4)]
        spatial: usize,
        /// Drone in open-plan apartments on ground-robot and drone maps.
        #[arg(long)]
        cross_embodiment: bool,
    },
}

/// Exit status classes.
#[derive(Debug)]
enum Failure {
    Task(String),
    Usage(String),
    Format(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Task(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Format(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Task(m) | Failure::Usage(m) | Failure::Format(m) => m,
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<MapFormatError> for Failure {
    fn from(e: MapFormatError) -> Self {
        match e {
            MapFormatError::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Format(e.to_string()),
        }
    }
}

impl From<FrameStoreError> for Failure {
    fn from(e: FrameStoreError) -> Self {
        match e {
            FrameStoreError::MissingManifest(_) | FrameStoreError::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Format(e.to_string()),
        }
    }
}

impl From<EmbeddingError> for Failure {
    fn from(e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Format(e.to_string()),
        }
    }
}

impl From<IndexError> for Failure {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Format(e.to_string()),
        }
    }
}

impl From<ObstacleError> for Failure {
    fn from(e: ObstacleError) -> Self {
        match e {
            ObstacleError::Io(_) => Failure::Usage(e.to_string()),
            ObstacleError::Profile { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Format(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io(_) => Failure::Usage(e.to_string()),
            SimError::InvalidEpisode(_) => Failure::Task(e.to_string()),
            _ => Failure::Format(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

struct Ctx {
    cfg: RunConfig,
    json: bool,
}

impl Ctx {
    /// Prints `value` with `--json`, otherwise `text`.
    fn emit(&self, value: Value, text: &str) {
        let mut out = io::stdout().lock();
        if self.json {
            let _ = writeln!(out, "{value}");
        } else {
            let _ = write!(out, "{text}");
        }
    }
}

fn parse_numbers(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Failure::Usage(format!("{what}: expected comma-separated numbers, got {s:?}")))
}

fn parse_cell(s: &str, what: &str) -> Result<GridCoord, Failure> {
    match parse_numbers(s, what)?.as_slice() {
        [x, y] if *x >= 0.0 && *y >= 0.0 && x.fract() == 0.0 && y.fract() == 0.0 => {
            Ok(GridCoord::new(*x as usize, *y as usize))
        }
        _ => Err(Failure::Usage(format!("{what}: expected a cell \"px,py\", got {s:?}"))),
    }
}

fn parse_state(s: &str) -> Result<AgentState, Failure> {
    match parse_numbers(s, "start")?.as_slice() {
        [x, y] => Ok(AgentState::new(*x, *y, 0.0)),
        [x, y, h] => Ok(AgentState::new(*x, *y, *h)),
        _ => Err(Failure::Usage(format!("start: expected \"px,py\" or \"px,py,heading\", got {s:?}"))),
    }
}

fn labels_from(s: &str) -> Result<LabelSet, Failure> {
    LabelSet::parse_list(s).map_err(|e| Failure::Usage(format!("labels: {e}")))
}

fn write_json(path: &Path, value: Value) -> Outcome {
    fs::write(path, serde_json::to_string_pretty(&value).map_err(|e| Failure::Format(e.to_string()))? + "\n")?;
    Ok(())
}

fn cmd_build(ctx: &Ctx, frames: &Path, out: &Path, grid: (Option<usize>, Option<usize>, Option<f32>)) -> Outcome {
    let store = FrameStore::open(frames)?;
    let m = store.manifest();
    let mut params = ctx.cfg.map;
    params.rows = grid.0.unwrap_or(params.rows);
    params.cols = grid.1.unwrap_or(params.cols);
    params.scale = grid.2.unwrap_or(params.scale);
    let mut map = VLMap::new(params, m.dim, m.provider_id.clone()).map_err(|e| Failure::Usage(e.to_string()))?;
    for f in store.iter() {
        map.integrate_frame(&f?, &ctx.cfg.integration).map_err(|e| Failure::Format(e.to_string()))?;
    }
    map.save(out)?;
    let d = *map.diagnostics();
    let observed = map.observed_cells();
    ctx.emit(
        json!({
            "frames": store.len(),
            "observed_cells": observed,
            "integrated_points": d.integrated,
            "skipped_invalid_depth": d.invalid_depth,
            "skipped_out_of_bounds": d.out_of_bounds,
            "map_id": map.content_id(),
        }),
        &format!(
            "frames: {}\nobserved cells: {observed}\npoints integrated: {}\npoints skipped: {} invalid depth, {} out of bounds\nmap id: {}\n",
            store.len(),
            d.integrated,
            d.invalid_depth,
            d.out_of_bounds,
            map.content_id()
        ),
    );
    Ok(())
}

fn cmd_index(ctx: &Ctx, map_path: &Path, labels: &str, out: &Path, legend_path: Option<&Path>) -> Outcome {
    let map = VLMap::load(map_path)?;
    let labels = labels_from(labels)?;
    let provider = ctx.cfg.label_provider(Some(map.provider_id()))?;
    let seg = segment(&map, &provider.embed_labels(&labels)?)?;
    write_label_png(out, seg.rows, seg.cols, &seg.labels, labels.len())?;
    let legend_path = legend_path.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("json"));
    write_json(&legend_path, json!(legend(&labels)))?;
    let mut counts = vec![0usize; labels.len()];
    for &l in seg.labels.iter().filter(|&&l| l != UNOBSERVED) {
        counts[l as usize] += 1;
    }
    let mut text = String::new();
    for (name, c) in labels.iter().zip(&counts) {
        text.push_str(&format!("{name}: {c} cells\n"));
    }
    let per: serde_json::Map<String, Value> = labels.iter().zip(&counts).map(|(n, c)| (n.to_string(), json!(c))).collect();
    ctx.emit(json!({ "png": out, "legend": legend_path, "cells": per, "observed": seg.observed() }), &text);
    Ok(())
}

fn profile_obstacles(ctx: &Ctx, map: &VLMap, name: &str) -> Result<(Mask, usize), Failure> {
    let profile = ctx.cfg.profile(name).ok_or_else(|| Failure::Usage(format!("unknown profile {name:?}")))?;
    let provider = ctx.cfg.label_provider(Some(map.provider_id()))?;
    let raw = build_obstacle_map(map, &profile, provider.as_ref())?;
    let r = profile.inflation_cells(map.grid().scale);
    Ok((inflate(&raw.blocked, r), r))
}

fn cmd_obstacles(ctx: &Ctx, map_path: &Path, profile: &str, out: &Path, sidecar: Option<&Path>) -> Outcome {
    let map = VLMap::load(map_path)?;
    let (blocked, r) = profile_obstacles(ctx, &map, profile)?;
    write_pgm(out, &blocked)?;
    let meta = ObstacleSidecar {
        profile: profile.to_string(),
        map_id: map.content_id(),
        rows: blocked.rows,
        cols: blocked.cols,
        inflation_cells: r,
        blocked_cells: blocked.count(),
    };
    let sidecar = sidecar.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("json"));
    write_json(&sidecar, json!(meta))?;
    ctx.emit(
        serde_json::to_value(&meta).expect("sidecar serializes"),
        &format!("{} blocked cells (inflated by {r}) written to {}\n", meta.blocked_cells, out.display()),
    );
    Ok(())
}

fn stack_obstacles(ctx: &Ctx, map: &VLMap, stack: &StackArgs) -> Result<Mask, Failure> {
    let blocked = match (&stack.obstacles, &stack.profile) {
        (Some(p), _) => read_pgm(p).map_err(|e| match e.kind() {
            io::ErrorKind::InvalidData => Failure::Format(format!("{}: {e}", p.display())),
            _ => Failure::Usage(format!("{}: {e}", p.display())),
        })?,
        (None, Some(name)) => profile_obstacles(ctx, map, name)?.0,
        (None, None) => return Err(Failure::Usage("either --profile or --obstacles is required".into())),
    };
    if (blocked.rows, blocked.cols) != (map.params().rows, map.params().cols) {
        return Err(Failure::Format("obstacle map size does not match the map".into()));
    }
    Ok(blocked)
}

fn cmd_plan(ctx: &Ctx, stack: &StackArgs, start: &str, goal: &str, heading: f64, actions: Option<&Path>) -> Outcome {
    let map = VLMap::load(&stack.map)?;
    let blocked = stack_obstacles(ctx, &map, stack)?;
    let (start, goal) = (parse_cell(start, "start")?, parse_cell(goal, "goal")?);
    let path = plan_path(&blocked, start, goal, &ctx.cfg.navigation.planner).map_err(|e| Failure::Task(e.to_string()))?;
    let scale = map.grid().scale;
    let acts = path_to_actions(&path, AgentState::at_cell(start, heading), scale);
    if let Some(p) = actions {
        fs::write(p, format_actions(&acts))?;
    }
    let cells: Vec<[usize; 2]> = path.cells.iter().map(|c| [c.px, c.py]).collect();
    ctx.emit(
        json!({
            "goal": [path.goal.px, path.goal.py],
            "cells": cells,
            "length_m": path.length_m(scale),
            "straight_steps": path.cost.straight,
            "diagonal_steps": path.cost.diagonal,
            "actions": acts.len(),
        }),
        &format!(
            "path of {} cells to ({}, {}), {:.3} m, {} actions\n",
            path.cells.len(),
            path.goal.px,
            path.goal.py,
            path.length_m(scale),
            acts.len()
        ),
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_exec(
    ctx: &Ctx,
    stack: &StackArgs,
    script_path: &Path,
    start: &str,
    labels: Option<&str>,
    trace: Option<&Path>,
    actions: Option<&Path>,
) -> Outcome {
    let text = fs::read_to_string(script_path).map_err(|e| Failure::Usage(format!("{}: {e}", script_path.display())))?;
    let script = parse_script(&text).map_err(|e| Failure::Format(format!("{}: {e}", script_path.display())))?;
    let map = VLMap::load(&stack.map)?;
    let blocked = stack_obstacles(ctx, &map, stack)?;
    let labels = match labels {
        Some(l) => labels_from(l)?,
        None => match SyntheticProvider::from_id(map.provider_id()) {
            Ok(p) => LabelSet::new(p.vocabulary().iter().cloned())?,
            Err(_) => return Err(Failure::Usage("--labels is required for maps not built by the synthetic provider".into())),
        },
    };
    let provider = ctx.cfg.label_provider(Some(map.provider_id()))?;
    let seg = segment(&map, &provider.embed_labels(&labels)?)?;
    let context = NavContext { grid: map.grid(), segmentation: &seg, labels: &labels, obstacles: &blocked };
    let mut nav = Navigator::new(context, ctx.cfg.navigation);
    let mut body = IdealBody::new(parse_state(start)?, map.grid().scale);
    let run = run_script(&script, &mut nav, &mut body);
    let lines = run.trace_jsonl();
    if let Some(p) = trace {
        fs::write(p, &lines)?;
    }
    if let Some(p) = actions {
        fs::write(p, format_actions(&body.actions))?;
    }
    let end = body.state;
    let summary = json!({
        "calls": run.trace.len(),
        "actions": body.actions.len(),
        "final_state": end,
        "error": run.error.as_ref().map(|e| e.to_string()),
    });
    if ctx.json {
        ctx.emit(summary, "");
    } else if trace.is_none() {
        print!("{lines}");
    } else {
        println!("{} calls, {} actions, final state ({:.2}, {:.2}, {:.0})", run.trace.len(), body.actions.len(), end.px, end.py, end.heading);
    }
    match run.error {
        Some(e) => Err(Failure::Task(e.to_string())),
        None => Ok(()),
    }
}

fn cmd_bench(ctx: &Ctx, suite_path: &Path, jobs: Option<usize>, out: Option<&Path>) -> Outcome {
    let suite = Suite::load(suite_path)?;
    let base = suite_path.parent().unwrap_or(Path::new("."));
    let report = run_suite(&suite, base, jobs.unwrap_or(ctx.cfg.bench.jobs))?;
    let csv = summary_csv(&report.summary);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("results.jsonl"), report.jsonl())?;
        fs::write(dir.join("summary.csv"), &csv)?;
    }
    ctx.emit(json!({ "episodes": report.results.len(), "summary": report.summary }), &csv);
    Ok(())
}

fn cmd_eval_seg(ctx: &Ctx, pred: &Path, gt: &Path, classes: Option<usize>) -> Outcome {
    let (pr, pc, p) = read_label_png(pred)?;
    let (gr, gc, g) = read_label_png(gt)?;
    if (pr, pc) != (gr, gc) {
        return Err(Failure::Format(format!("grids differ in shape: {pr}x{pc} vs {gr}x{gc}")));
    }
    let m = classes.unwrap_or_else(|| {
        p.iter().chain(&g).filter(|&&l| l != UNOBSERVED).map(|&l| l as usize + 1).max().unwrap_or(0)
    });
    let s = seg_metrics(&p, &g, m).map_err(|e| Failure::Format(e.to_string()))?;
    let mut text = format!(
        "pixel_acc {:.6}\nmean_acc {:.6}\nmIOU {:.6}\nfw_mIOU {:.6}\n",
        s.pixel_acc, s.mean_acc, s.miou, s.fw_miou
    );
    for (i, iou) in s.per_class_iou.iter().enumerate() {
        if let Some(v) = iou {
            text.push_str(&format!("class {i} IOU {v:.6}\n"));
        }
    }
    ctx.emit(serde_json::to_value(&s).expect("metrics serialize"), &text);
    Ok(())
}

fn cmd_synth(ctx: &Ctx, cmd: &Synth) -> Outcome {
    let seed = ctx.cfg.seed;
    match cmd {
        Synth::Scene { kind, size, out } => {
            let mut scene = match kind {
                SceneKind::Kitchen => kitchen_fixture(),
                SceneKind::Apartment | SceneKind::OpenPlan => {
                    let mut p = if matches!(kind, SceneKind::OpenPlan) { ApartmentParams::open_plan() } else { ApartmentParams::default() };
                    if let Some(n) = size {
                        p.size = *n;
                    }
                    generate_apartment(seed, &p)?
                }
            };
            scene.seed = seed;
            scene.save(out)?;
            let inventory: serde_json::Map<String, Value> =
                scene.inventory().into_iter().map(|(k, v)| (k, json!(v.len()))).collect();
            let mut text = format!("{} ({}x{} cells)\n", scene.name, scene.rows, scene.cols);
            for (k, v) in &inventory {
                text.push_str(&format!("  {k}: {v}\n"));
            }
            ctx.emit(json!({ "name": scene.name, "rows": scene.rows, "cols": scene.cols, "inventory": inventory }), &text);
        }
        Synth::Frames { scene, out, spacing, gt } => {
            let scene = Scene::load(scene)?;
            let provider = ctx.cfg.synthetic_provider()?;
            let views = exploration_views(&scene, *spacing, 0.18);
            if views.is_empty() {
                return Err(Failure::Task("the scene has no free space to stand in".into()));
            }
            let mut writer = StoreWriter::create(out)?;
            let mut topdown = TopDownLabels::new(scene.grid());
            let mut failure = None;
            render_views(&scene, &provider, &Default::default(), &views, |r| {
                topdown.add_frame(&r.frame, &r.labels);
                if let Err(e) = writer.push(&r.frame) {
                    failure.get_or_insert(e);
                }
                Ok(())
            })?;
            if let Some(e) = failure {
                return Err(e.into());
            }
            writer.finish()?;
            if let Some(gt) = gt {
                write_label_png(gt, scene.rows, scene.cols, &topdown.labels, scene.labels.len())?;
                write_json(&gt.with_extension("json"), json!(legend(&scene.label_set())))?;
            }
            ctx.emit(
                json!({
                    "frames": views.len(),
                    "provider_id": provider_id(&provider),
                    "labels": scene.labels,
                    "rows": scene.rows,
                    "cols": scene.cols,
                    "scale": scene.scale,
                }),
                &format!(
                    "{} frames written to {}\nscene labels: {}\ngrid: --rows {} --cols {} --scale {}\n",
                    views.len(),
                    out.display(),
                    scene.labels.join(","),
                    scene.rows,
                    scene.cols,
                    scene.scale
                ),
            );
        }
        Synth::Suite { out, scenes, multi_object, spatial, cross_embodiment } => {
            let spec = if *cross_embodiment {
                SuiteSpec { multi_object_per_scene: *multi_object, ..SuiteSpec::cross_embodiment(*scenes, seed) }
            } else {
                SuiteSpec {
                    seed,
                    scenes: *scenes,
                    multi_object_per_scene: *multi_object,
                    spatial_per_scene: *spatial,
                    ..SuiteSpec::default()
                }
            };
            let suite = generate_suite(&spec)?;
            suite.save(out)?;
            ctx.emit(
                json!({ "scenes": suite.scenes.len(), "tasks": suite.tasks.len() }),
                &format!("{} tasks over {} scenes written to {}\n", suite.tasks.len(), suite.scenes.len(), out.display()),
            );
        }
    }
    Ok(())
}

fn provider_id(p: &SyntheticProvider) -> String {
    use vlmap::embedding::EmbeddingProvider;
    p.id().to_string()
}

fn run(cli: Cli) -> Outcome {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let ctx = Ctx { cfg, json: cli.json };
    match &cli.command {
        Command::Build { frames, out, rows, cols, scale } => cmd_build(&ctx, frames, out, (*rows, *cols, *scale)),
        Command::Index { map, labels, out, legend } => cmd_index(&ctx, map, labels, out, legend.as_deref()),
        Command::Obstacles { map, profile, out, sidecar } => cmd_obstacles(&ctx, map, profile, out, sidecar.as_deref()),
        Command::Plan { stack, start, goal, heading, actions } => {
            cmd_plan(&ctx, stack, start, goal, *heading, actions.as_deref())
        }
        Command::Exec { stack, script, start, labels, trace, actions } => {
            cmd_exec(&ctx, stack, script, start, labels.as_deref(), trace.as_deref(), actions.as_deref())
        }
        Command::Bench { suite, jobs, out } => cmd_bench(&ctx, suite, *jobs, out.as_deref()),
        Command::EvalSeg { pred, gt, classes } => cmd_eval_seg(&ctx, pred, gt, *classes),
        Command::Synth(s) => cmd_synth(&ctx, s),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("vlmap: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
