mod common;

use common::{dijkstra_oracle, random_free, random_obstacles, walk_length};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vlmap::geometry::GridCoord;
use vlmap::index::Mask;
use vlmap::nav::{plan_path, PlanError, PlannerOptions};

#[test]
fn astar_cost_equals_dijkstra_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let opts = PlannerOptions::default();
    let (mut solved, mut unreachable) = (0, 0);
    for case in 0..200 {
        let m = random_obstacles(&mut rng, 64);
        let s = random_free(&mut rng, &m);
        let g = random_free(&mut rng, &m);
        match (plan_path(&m, s, g, &opts), dijkstra_oracle(&m, s, g)) {
            (Ok(path), Some(best)) => {
                solved += 1;
                assert!((path.cost.value() - best).abs() < 1e-9, "case {case}: planner {} oracle {best}", path.cost.value());
                assert_eq!(path.cells.first(), Some(&s));
                assert_eq!(path.cells.last(), Some(&g));
                let walked = walk_length(&m, &path.cells).unwrap_or_else(|e| panic!("case {case}: {e}"));
                assert!((walked - best).abs() < 1e-9);
            }
            (Err(PlanError::NoPath { .. }), None) => unreachable += 1,
            (got, want) => panic!("case {case}: planner {got:?}, oracle {want:?}"),
        }
    }
    assert!(solved > 150 && unreachable > 0, "solved {solved}, unreachable {unreachable}");
}

#[test]
fn blocked_goal_is_retargeted_to_a_free_cell() {
    let mut m = Mask::new(20, 20);
    for y in 5..15 {
        for x in 8..12 {
            m.set(GridCoord::new(x, y), true);
        }
    }
    let path = plan_path(&m, GridCoord::new(0, 0), GridCoord::new(10, 10), &PlannerOptions::default()).unwrap();
    assert!(!m.get(path.goal));
    assert!(path.cells.iter().all(|c| !m.get(*c)));
    let near = PlannerOptions { retarget_radius: 1 };
    assert!(plan_path(&m, GridCoord::new(0, 0), GridCoord::new(10, 10), &near).is_err());
}

#[test]
fn start_equals_goal_is_a_single_cell() {
    let m = Mask::new(4, 4);
    let p = plan_path(&m, GridCoord::new(1, 1), GridCoord::new(1, 1), &PlannerOptions::default()).unwrap();
    assert_eq!(p.cells, vec![GridCoord::new(1, 1)]);
    assert_eq!(p.cost.value(), 0.0);
}
