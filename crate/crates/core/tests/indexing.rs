mod common;

use common::{naive_segment, random_index_case};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlmap::embedding::EmbeddingMatrix;
use vlmap::index::{find_components, segment, Mask};
use vlmap::map::{MapParams, VLMap};

#[test]
fn segment_equals_naive_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ties = 0;
    for case in 0..100 {
        let (map, e) = random_index_case(&mut rng);
        let seg = segment(&map, &e).unwrap();
        assert_eq!(seg.labels, naive_segment(&map, &e), "case {case}");
        let grid = map.grid();
        for i in 0..grid.len() {
            let c = grid.coord(i);
            if map.count(c) == 0 {
                continue;
            }
            let q = map.cell_embedding(c);
            let scores: Vec<f32> = (0..e.rows()).map(|r| q.iter().zip(e.row(r)).map(|(a, b)| a * b).sum()).collect();
            let best = scores.iter().cloned().fold(f32::MIN, f32::max);
            ties += (scores.iter().filter(|&&s| s == best).count() > 1) as usize;
        }
    }
    assert!(ties > 100, "tie rule should be exercised, saw {ties}");
}

#[test]
fn dimension_mismatch_is_rejected() {
    let map = VLMap::new(MapParams { scale: 0.05, rows: 2, cols: 2, t1: 0.2, t2: 1.8 }, 4, "test").unwrap();
    let e = EmbeddingMatrix::new(2, 3, vec![0.0; 6]).unwrap();
    assert!(segment(&map, &e).is_err());
}

/// Flood fill oracle for 4-connected component sizes.
fn component_sizes(mask: &Mask) -> Vec<usize> {
    let mut seen = vec![false; mask.data.len()];
    let mut sizes = Vec::new();
    for start in 0..mask.data.len() {
        if !mask.data[start] || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut n = 0;
        while let Some(i) = stack.pop() {
            n += 1;
            let (x, y) = ((i / mask.cols) as i64, (i % mask.cols) as i64);
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= mask.rows as i64 || ny >= mask.cols as i64 {
                    continue;
                }
                let j = nx as usize * mask.cols + ny as usize;
                if mask.data[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        sizes.push(n);
    }
    sizes.sort();
    sizes
}

#[test]
fn components_match_flood_fill() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (r, c) = (rng.random_range(1..30), rng.random_range(1..30));
        let p = rng.random_range(0.1..0.6);
        let mask = Mask::from_fn(r, c, |_| rng.random_bool(p));
        let comps = find_components(&mask);
        let mut sizes: Vec<usize> = comps.iter().map(|c| c.len()).collect();
        sizes.sort();
        assert_eq!(sizes, component_sizes(&mask));
        for comp in &comps {
            let inside = comp.cells.iter().all(|c| comp.bbox.contains(c.px as f64, c.py as f64));
            assert!(inside && !comp.contour.is_empty());
        }
    }
}
