//! Oracles and fixtures shared by the integration tests and the acceptance
//! report. Each oracle recomputes its quantity the slow, obvious way.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vlmap::embedding::{normalize, EmbeddingMatrix, EmbeddingProvider, SyntheticProvider};
use vlmap::geometry::{back_project, to_world, GridCoord, Intrinsics, PixelCoord, Pose, WorldPoint};
use vlmap::index::{Mask, UNOBSERVED};
use vlmap::map::{EmbeddingFrame, IntegrationOptions, MapParams, VLMap};
use vlmap::nav::{AgentState, Navigator};
use vlmap::script::{parse_script, run_script, ScriptRun};
use vlmap::sim::bench::BenchSettings;
use vlmap::sim::{kitchen_fixture, Embodiment, EpisodeOutcome, PreparedScene, SimBody};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

// ---- projection

// (scale, rows, cols, x, z, expected cell). Worked by hand from
// px = floor(rows/2 + x/s + 0.5), py = floor(cols/2 - z/s + 0.5).
pub const PROJECTION_CASES: [(f64, usize, usize, f64, f64, Option<(usize, usize)>); 20] = [
    (0.05, 1000, 1000, 0.0, 0.0, Some((500, 500))),
    (0.05, 1000, 1000, 1.0, 0.0, Some((520, 500))),
    (0.05, 1000, 1000, -1.0, 0.0, Some((480, 500))),
    (0.05, 1000, 1000, 0.0, 1.0, Some((500, 480))),
    (0.05, 1000, 1000, 0.0, -2.5, Some((500, 550))),
    (0.05, 1000, 1000, 0.024, 0.0, Some((500, 500))),
    (0.05, 1000, 1000, 0.026, 0.0, Some((501, 500))),
    (0.05, 1000, 1000, -0.024, 0.0, Some((500, 500))),
    (0.05, 1000, 1000, -0.026, 0.0, Some((499, 500))),
    (0.05, 1000, 1000, 24.97, 0.0, Some((999, 500))),
    (0.05, 1000, 1000, 24.99, 0.0, None),
    (0.05, 1000, 1000, -25.02, 0.0, Some((0, 500))),
    (0.05, 1000, 1000, -25.04, 0.0, None),
    (0.05, 1000, 1000, 3.31, -7.77, Some((566, 655))),
    (0.25, 8, 8, 0.0, 0.0, Some((4, 4))),
    (0.25, 8, 8, 0.125, 0.0, Some((5, 4))),
    (0.25, 8, 8, -0.125, 0.125, Some((4, 4))),
    (0.25, 8, 8, -1.125, -0.125, Some((0, 5))),
    (0.25, 8, 8, 0.875, -0.875, None),
    (0.5, 10, 6, 1.2, 0.3, Some((7, 2))),
];

// ---- fusion

pub const FUSION_DIM: usize = 8;
pub const FUSION_PROVIDER: &str = "test:fusion";

pub fn fusion_params() -> MapParams {
    MapParams { scale: 0.1, rows: 80, cols: 80, t1: 0.2, t2: 1.8 }
}

pub fn random_frame(rng: &mut ChaCha8Rng, id: usize) -> EmbeddingFrame {
    let k = Intrinsics::from_fov(16, 12, 90.0).unwrap();
    let position = WorldPoint::new(rng.random_range(-2.0..2.0), rng.random_range(0.5..1.5), rng.random_range(-2.0..2.0));
    let pose = Pose::looking(position, rng.random_range(0.0..360.0), rng.random_range(10.0..50.0));
    let n = (k.width * k.height) as usize;
    // some holes and some far returns beyond the cutoff
    let depth = (0..n)
        .map(|_| match rng.random_range(0..20) {
            0 => 0.0,
            1 => 12.0,
            _ => rng.random_range(0.3f32..4.0),
        })
        .collect();
    let embeddings = (0..n * FUSION_DIM).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    EmbeddingFrame {
        frame_id: format!("{id:04}"),
        provider_id: FUSION_PROVIDER.into(),
        intrinsics: k,
        pose,
        dim: FUSION_DIM,
        depth,
        embeddings,
    }
}

/// Sums every point falling in a cell and divides once at the end.
pub fn batch_means(frames: &[EmbeddingFrame], opts: &IntegrationOptions) -> (Vec<u32>, Vec<f64>) {
    let grid = VLMap::new(fusion_params(), FUSION_DIM, FUSION_PROVIDER).unwrap().grid();
    let dim = FUSION_DIM;
    let mut counts = vec![0u32; grid.len()];
    let mut sums = vec![0.0f64; grid.len() * dim];
    for f in frames {
        let k = &f.intrinsics;
        for v in 0..k.height {
            for u in 0..k.width {
                let d = f.depth[(v * k.width + u) as usize] as f64;
                if !(d > 0.0 && d <= opts.max_depth) {
                    continue;
                }
                let w = to_world(back_project(PixelCoord::new(u, v), d, k).unwrap(), &f.pose);
                let Some(c) = grid.project(&w) else { continue };
                let i = grid.index(c);
                counts[i] += 1;
                for (s, e) in sums[i * dim..(i + 1) * dim].iter_mut().zip(f.pixel_embedding(u, v)) {
                    *s += *e as f64;
                }
            }
        }
    }
    for (i, &n) in counts.iter().enumerate() {
        if n > 0 {
            sums[i * dim..(i + 1) * dim].iter_mut().for_each(|s| *s /= n as f64);
        }
    }
    (counts, sums)
}

pub fn integrate(frames: &[EmbeddingFrame], opts: &IntegrationOptions) -> VLMap {
    let mut map = VLMap::new(fusion_params(), FUSION_DIM, FUSION_PROVIDER).unwrap();
    for f in frames {
        map.integrate_frame(f, opts).unwrap();
    }
    map
}

pub fn max_abs_diff(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x as f64 - y).abs()).fold(0.0, f64::max)
}

// ---- indexing

/// Small integer components keep every dot product exact, so ties are real.
pub fn random_index_case(rng: &mut ChaCha8Rng) -> (VLMap, EmbeddingMatrix) {
    let dim = rng.random_range(1..6);
    let labels = rng.random_range(1..7);
    let rows = rng.random_range(1..20);
    let cols = rng.random_range(1..20);
    let mut data: Vec<f32> = (0..labels * dim).map(|_| rng.random_range(-2..=2) as f32).collect();
    if labels > 1 && rng.random_bool(0.5) {
        // duplicate a row to force ties
        let (a, b) = (rng.random_range(0..labels), rng.random_range(0..labels));
        let row: Vec<f32> = data[a * dim..(a + 1) * dim].to_vec();
        data[b * dim..(b + 1) * dim].copy_from_slice(&row);
    }
    let e = EmbeddingMatrix::new(labels, dim, data).unwrap();
    let mut map = VLMap::new(MapParams { scale: 0.05, rows, cols, t1: 0.2, t2: 1.8 }, dim, "test").unwrap();
    for px in 0..rows {
        for py in 0..cols {
            if rng.random_bool(0.8) {
                let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-3..=3) as f32).collect();
                map.fuse_point(GridCoord::new(px, py), &v, 0.0);
            }
        }
    }
    (map, e)
}

/// Every score first, then the first position holding the maximum.
pub fn naive_label(q: &[f32], e: &EmbeddingMatrix) -> u32 {
    let mut scores = Vec::new();
    for i in 0..e.rows() {
        let mut s = 0.0f64;
        for d in 0..e.dim() {
            s += q[d] as f64 * e.row(i)[d] as f64;
        }
        scores.push(s);
    }
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|&s| s == best).unwrap() as u32
}

pub fn naive_segment(map: &VLMap, e: &EmbeddingMatrix) -> Vec<u32> {
    let grid = map.grid();
    (0..grid.len())
        .map(|i| {
            let c = grid.coord(i);
            if map.count(c) == 0 {
                UNOBSERVED
            } else {
                naive_label(map.cell_embedding(c), e)
            }
        })
        .collect()
}

// ---- planning

pub fn is_free(m: &Mask, x: i64, y: i64) -> bool {
    x >= 0 && y >= 0 && (x as usize) < m.rows && (y as usize) < m.cols && !m.get(GridCoord::new(x as usize, y as usize))
}

/// Plain Dijkstra over float costs with the same corner rule: a diagonal
/// step needs both orthogonal neighbors free.
pub fn dijkstra_oracle(m: &Mask, s: GridCoord, g: GridCoord) -> Option<f64> {
    let idx = |x: i64, y: i64| x as usize * m.cols + y as usize;
    let mut dist = vec![f64::INFINITY; m.rows * m.cols];
    let mut heap = BinaryHeap::new();
    dist[idx(s.px as i64, s.py as i64)] = 0.0;
    // heap keys are nanometer-rounded; exact sums stay in `dist`
    heap.push(Reverse((0u64, s.px as i64, s.py as i64)));
    while let Some(Reverse((_, x, y))) = heap.pop() {
        let d = dist[idx(x, y)];
        if x == g.px as i64 && y == g.py as i64 {
            return Some(d);
        }
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                if (dx, dy) == (0, 0) || !is_free(m, x + dx, y + dy) {
                    continue;
                }
                let diag = dx != 0 && dy != 0;
                if diag && !(is_free(m, x + dx, y) && is_free(m, x, y + dy)) {
                    continue;
                }
                let nd = d + if diag { std::f64::consts::SQRT_2 } else { 1.0 };
                let j = idx(x + dx, y + dy);
                if nd < dist[j] - 1e-12 {
                    dist[j] = nd;
                    heap.push(Reverse(((nd * 1e9) as u64, x + dx, y + dy)));
                }
            }
        }
    }
    None
}

pub fn random_free(rng: &mut ChaCha8Rng, m: &Mask) -> GridCoord {
    loop {
        let c = GridCoord::new(rng.random_range(0..m.rows), rng.random_range(0..m.cols));
        if !m.get(c) {
            return c;
        }
    }
}

/// Scattered blocked cells plus a few straight walls.
pub fn random_obstacles(rng: &mut ChaCha8Rng, n: usize) -> Mask {
    let density = rng.random_range(0.0..0.4);
    let mut m = Mask::from_fn(n, n, |_| rng.random_bool(density));
    for _ in 0..rng.random_range(0..4) {
        let (x, y0, len) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(5..40));
        let vertical = rng.random_bool(0.5);
        for y in y0..(y0 + len).min(n) {
            m.set(if vertical { GridCoord::new(x, y) } else { GridCoord::new(y, x) }, true);
        }
    }
    m
}

/// Checks a planned cell sequence and returns its length in cells.
pub fn walk_length(m: &Mask, cells: &[GridCoord]) -> Result<f64, String> {
    let mut walked = 0.0;
    for c in cells {
        if m.get(*c) {
            return Err(format!("planned through blocked cell {c:?}"));
        }
    }
    for w in cells.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b.px as i64 - a.px as i64, b.py as i64 - a.py as i64);
        if dx.abs() > 1 || dy.abs() > 1 || (dx, dy) == (0, 0) {
            return Err(format!("{a:?} -> {b:?} is not a grid move"));
        }
        if dx != 0 && dy != 0 {
            if !(is_free(m, a.px as i64 + dx, a.py as i64) && is_free(m, a.px as i64, a.py as i64 + dy)) {
                return Err(format!("{a:?} -> {b:?} cuts a corner"));
            }
            walked += std::f64::consts::SQRT_2;
        } else {
            walked += 1.0;
        }
    }
    Ok(walked)
}

// ---- obstacles

/// Every cell within Euclidean distance `r` of any blocked cell.
pub fn dilate_oracle(m: &Mask, r: usize) -> Mask {
    let src: Vec<GridCoord> = m.cells().collect();
    let r2 = (r * r) as i64;
    Mask::from_fn(m.rows, m.cols, |c| {
        src.iter().any(|s| {
            let (dx, dy) = (s.px as i64 - c.px as i64, s.py as i64 - c.py as i64);
            dx * dx + dy * dy <= r2
        })
    })
}

pub const POTENTIAL: [&str; 8] = ["floor", "wall", "chair", "table", "sofa", "window", "counter", "other"];

/// A map whose cells hold noisy prototypes of random potential obstacles.
pub fn random_label_map(rng: &mut ChaCha8Rng, provider: &SyntheticProvider) -> VLMap {
    let (rows, cols) = (rng.random_range(8..40), rng.random_range(8..40));
    let mut map = VLMap::new(MapParams { scale: 0.05, rows, cols, t1: 0.2, t2: 1.8 }, provider.dim(), provider.id()).unwrap();
    let sigma = rng.random_range(0.0..0.5);
    for px in 0..rows {
        for py in 0..cols {
            if rng.random_bool(0.1) {
                continue;
            }
            let label = POTENTIAL[rng.random_range(0..POTENTIAL.len())];
            let mut e = provider.text_embedding(label);
            e.iter_mut().for_each(|v| *v += (rng.sample::<f64, _>(StandardNormal) * sigma) as f32);
            normalize(&mut e);
            map.fuse_point(GridCoord::new(px, py), &e, rng.random_range(0.0..2.5));
        }
    }
    map
}

pub fn shuffled<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> Vec<T> {
    let mut v = items.to_vec();
    for i in (1..v.len()).rev() {
        v.swap(i, rng.random_range(0..=i));
    }
    v
}

// ---- scores

pub fn ep(success: bool, shortest: f64, path: f64) -> EpisodeOutcome {
    EpisodeOutcome { success, shortest, path }
}

pub fn spl_hand_sets() -> [(Vec<EpisodeOutcome>, f64); 5] {
    [
        (vec![ep(true, 10.0, 10.0)], 1.0),
        (vec![ep(true, 10.0, 20.0), ep(false, 5.0, 5.0)], 0.25),
        // travelling less than the shortest path counts as 1
        (vec![ep(true, 4.0, 2.0)], 1.0),
        (vec![ep(true, 3.0, 4.0), ep(true, 6.0, 8.0), ep(true, 1.0, 1.0)], 2.5 / 3.0),
        (vec![ep(true, 2.5, 10.0), ep(true, 7.0, 7.0), ep(false, 3.0, 1.0), ep(true, 1.0, 4.0)], 0.375),
    ]
}

// ---- segmentation metrics

pub struct BruteSeg {
    pub pixel_acc: f64,
    pub mean_acc: f64,
    pub miou: f64,
    pub fw_miou: f64,
    pub confusion: Vec<Vec<u64>>,
}

/// Counts straight from the definitions, one class at a time.
pub fn brute_seg(pred: &[u32], gt: &[u32], m: usize) -> BruteSeg {
    let valid: Vec<(u32, u32)> = pred
        .iter()
        .zip(gt)
        .filter(|(p, g)| **p != UNOBSERVED && **g != UNOBSERVED)
        .map(|(p, g)| (*p, *g))
        .collect();
    let mut confusion = vec![vec![0u64; m]; m];
    for (g, row) in confusion.iter_mut().enumerate() {
        for (p, cell) in row.iter_mut().enumerate() {
            *cell = valid.iter().filter(|&&(pp, gg)| pp as usize == p && gg as usize == g).count() as u64;
        }
    }
    let n = valid.len() as f64;
    let correct = valid.iter().filter(|(p, g)| p == g).count() as f64;
    let (mut acc_sum, mut acc_n, mut iou_sum, mut iou_n, mut fw) = (0.0, 0, 0.0, 0, 0.0);
    for c in 0..m as u32 {
        let tp = valid.iter().filter(|&&(p, g)| p == c && g == c).count() as f64;
        let in_gt = valid.iter().filter(|&&(_, g)| g == c).count() as f64;
        let in_pred = valid.iter().filter(|&&(p, _)| p == c).count() as f64;
        if in_gt > 0.0 {
            acc_sum += tp / in_gt;
            acc_n += 1;
        }
        let union = in_gt + in_pred - tp;
        if union > 0.0 {
            iou_sum += tp / union;
            iou_n += 1;
            fw += in_gt / n * (tp / union);
        }
    }
    BruteSeg { pixel_acc: correct / n, mean_acc: acc_sum / acc_n as f64, miou: iou_sum / iou_n as f64, fw_miou: fw, confusion }
}

pub fn random_seg_pair(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (Vec<u32>, Vec<u32>) {
    let cell = |rng: &mut ChaCha8Rng| if rng.random_bool(0.1) { UNOBSERVED } else { rng.random_range(0..m as u32) };
    let gt: Vec<u32> = (0..n).map(|_| cell(rng)).collect();
    // predictions agree with the ground truth most of the time
    let pred = gt.iter().map(|&g| if g != UNOBSERVED && rng.random_bool(0.6) { g } else { cell(rng) }).collect();
    (pred, gt)
}

// ---- noise oracle

/// Fraction of noisy prototype samples whose nearest label is their own.
pub fn noise_oracle(provider: &SyntheticProvider, labels: usize, sigma: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut correct = 0usize;
    for s in 0..samples {
        let truth = s % labels;
        let q: Vec<f64> = provider.prototype(truth).iter().map(|&v| v as f64 + rng.sample::<f64, _>(StandardNormal) * sigma).collect();
        let score = |l: usize| provider.prototype(l).iter().zip(&q).map(|(a, b)| *a as f64 * b).sum::<f64>();
        let best = (0..labels).max_by(|&a, &b| score(a).total_cmp(&score(b)).then(b.cmp(&a))).unwrap();
        correct += (best == truth) as usize;
    }
    correct as f64 / samples as f64
}

// ---- golden scripts on the kitchen fixture

pub struct Kitchen {
    pub prepared: PreparedScene,
    pub obstacles: Mask,
    pub settings: BenchSettings,
}

/// Renders the fixture, builds and indexes its map, and derives planning
/// obstacles from every non-floor category.
pub fn kitchen() -> Kitchen {
    let settings = BenchSettings::default();
    let provider = settings.provider().unwrap();
    let body = Embodiment::ground();
    let prepared = PreparedScene::build(kitchen_fixture(), &body, &settings, &provider).unwrap();
    let obstacles = prepared.obstacles("scene", None, &body, &provider).unwrap();
    Kitchen { prepared, obstacles, settings }
}

pub fn run_on_kitchen(k: &Kitchen, script_file: &str, start: AgentState) -> ScriptRun {
    let text = std::fs::read_to_string(fixture(script_file)).unwrap();
    let script = parse_script(&text).unwrap();
    let truth = &k.prepared.truth;
    let labels = truth.scene.label_set();
    let ctx = vlmap::nav::NavContext {
        grid: truth.scene.grid(),
        segmentation: &k.prepared.segmentation,
        labels: &labels,
        obstacles: &k.obstacles,
    };
    let mut nav = Navigator::new(ctx, k.settings.nav);
    let mut body = SimBody::new(truth.blocked.clone(), truth.scene.grid().scale, start, k.settings.budget);
    run_script(&script, &mut nav, &mut body)
}

/// Ground-truth cells of a label: distance from a point to the nearest one
/// and the component centroid.
pub fn label_geometry(k: &Kitchen, label: &str) -> (Vec<(f64, f64)>, (f64, f64)) {
    let scene = &k.prepared.truth.scene;
    let idx = scene.label_index(label).unwrap();
    let cells: Vec<(f64, f64)> = scene
        .label_grid
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == idx)
        .map(|(i, _)| ((i / scene.cols) as f64, (i % scene.cols) as f64))
        .collect();
    let n = cells.len() as f64;
    let c = (cells.iter().map(|p| p.0).sum::<f64>() / n, cells.iter().map(|p| p.1).sum::<f64>() / n);
    (cells, c)
}

pub fn nearest(cells: &[(f64, f64)], s: &AgentState) -> f64 {
    cells.iter().map(|c| ((c.0 - s.px).powi(2) + (c.1 - s.py).powi(2)).sqrt()).fold(f64::INFINITY, f64::min)
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn expect_calls(run: &ScriptRun, names: &[&str]) -> Result<(), String> {
    if let Some(e) = &run.error {
        return Err(format!("runtime error: {e}"));
    }
    let got: Vec<&str> = run.trace.iter().map(|r| r.primitive.name()).collect();
    ensure(got == names, || format!("calls {got:?}"))
}

pub const REARRANGE_START: (f64, f64, f64) = (40.0, 30.0, 90.0);
pub const LAPTOP_START: (f64, f64, f64) = (80.0, 130.0, 0.0);

/// Left of the counter, then between sink and oven, then sofa and table
/// twice, judged against ground-truth geometry.
pub fn check_rearrange(k: &Kitchen) -> Result<(), String> {
    let (sx, sy, sh) = REARRANGE_START;
    let run = run_on_kitchen(k, "golden_rearrange.nav", AgentState::new(sx, sy, sh));
    expect_calls(
        &run,
        &["move_to_left", "move_in_between", "get_pos", "get_pos", "move_to", "move_to", "move_to", "move_to"],
    )?;
    let per_meter = 1.0 / k.prepared.truth.scene.scale as f64;
    let states: Vec<AgentState> = run.trace.iter().map(|r| r.state).collect();

    // left of the counter as seen when setting off towards it
    let (counter, cc) = label_geometry(k, "counter");
    let (dx, dy) = (cc.0 - sx, cc.1 - sy);
    let left = (-dy, dx);
    let s = states[0];
    let side = (s.px - cc.0) * left.0 + (s.py - cc.1) * left.1;
    let d = nearest(&counter, &s) / per_meter;
    ensure(side > 0.0 && (0.5..=1.5).contains(&d), || format!("left of counter: stop {s:?}, side {side:.1}, {d:.2} m away"))?;

    let (_, sink) = label_geometry(k, "sink");
    let (_, oven) = label_geometry(k, "oven");
    let mid = ((sink.0 + oven.0) / 2.0, (sink.1 + oven.1) / 2.0);
    let s = states[1];
    let off = ((s.px - mid.0).powi(2) + (s.py - mid.1).powi(2)).sqrt() / per_meter;
    ensure(off <= 0.25, || format!("between sink and oven: stop {s:?} is {off:.2} m from the midpoint"))?;

    let (sofa, _) = label_geometry(k, "sofa");
    let (table, _) = label_geometry(k, "table");
    for (i, want) in ["sofa", "table", "sofa", "table"].iter().enumerate() {
        let s = states[4 + i];
        let (ds, dt) = (nearest(&sofa, &s) / per_meter, nearest(&table, &s) / per_meter);
        let (near, far) = if *want == "sofa" { (ds, dt) } else { (dt, ds) };
        ensure(near <= 1.0 && far > 1.0, || format!("visit {} should reach the {want}: stop {s:?}, sofa {ds:.2} m, table {dt:.2} m", i + 1))?;
    }
    Ok(())
}

/// North of the laptop, face it, turn around, 2 m forward, then 3 m to
/// the right.
pub fn check_laptop(k: &Kitchen) -> Result<(), String> {
    let (sx, sy, sh) = LAPTOP_START;
    let run = run_on_kitchen(k, "golden_laptop.nav", AgentState::new(sx, sy, sh));
    expect_calls(&run, &["move_north", "face", "turn", "move_forward", "turn", "move_forward"])?;
    let per_meter = 1.0 / k.prepared.truth.scene.scale as f64;
    let st: Vec<AgentState> = run.trace.iter().map(|r| r.state).collect();

    let (laptop, lc) = label_geometry(k, "laptop");
    let top = laptop.iter().map(|c| c.1).fold(f64::MIN, f64::max);
    let s = st[0];
    let d = nearest(&laptop, &s) / per_meter;
    ensure(s.py > top && (s.px - lc.0).abs() <= 5.0 && (0.5..=1.5).contains(&d), || format!("north of laptop: stop {s:?}, {d:.2} m away"))?;

    let s = st[1];
    let to_laptop = (lc.0 - s.px).atan2(lc.1 - s.py).to_degrees();
    ensure(angle_gap(s.heading, to_laptop) <= 2.0, || format!("face laptop: heading {:.1}, bearing {to_laptop:.1}", s.heading))?;
    ensure(angle_gap(st[2].heading, st[1].heading + 180.0) <= 1.0, || format!("turn 180: {:.1} -> {:.1}", st[1].heading, st[2].heading))?;

    let leg = |a: AgentState, b: AgentState, meters: f64| -> Result<(), String> {
        let want = (a.heading.to_radians().sin() * meters * per_meter, a.heading.to_radians().cos() * meters * per_meter);
        let got = (b.px - a.px, b.py - a.py);
        let err = ((got.0 - want.0).powi(2) + (got.1 - want.1).powi(2)).sqrt();
        ensure(err <= 1.5, || format!("forward {meters} m from {a:?} ended at {b:?}"))
    };
    leg(st[2], st[3], 2.0)?;
    ensure(angle_gap(st[4].heading, st[3].heading + 90.0) <= 1.0, || format!("turn 90: {:.1} -> {:.1}", st[3].heading, st[4].heading))?;
    leg(st[4], st[5], 3.0)?;
    // the last leg heads to the right of the second
    let (a, b) = ((st[3].px - st[2].px, st[3].py - st[2].py), (st[5].px - st[4].px, st[5].py - st[4].py));
    let cross = a.0 * b.1 - a.1 * b.0;
    ensure(cross < 0.0, || format!("third leg {b:?} is not to the right of {a:?}"))
}
