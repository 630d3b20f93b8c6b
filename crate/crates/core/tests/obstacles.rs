mod common;

use common::{dilate_oracle, random_label_map, shuffled, POTENTIAL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlmap::embedding::SyntheticProvider;
use vlmap::index::Mask;
use vlmap::obstacle::{build_obstacle_map, inflate, EmbodimentProfile};

#[test]
fn inflation_matches_brute_force_dilation() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let (rows, cols) = (rng.random_range(1..40), rng.random_range(1..40));
        let p = rng.random_range(0.0..0.08);
        let m = Mask::from_fn(rows, cols, |_| rng.random_bool(p));
        let r = rng.random_range(0..7);
        let out = inflate(&m, r);
        assert_eq!(out, dilate_oracle(&m, r), "{rows}x{cols} r={r}");
        assert!(m.is_subset_of(&out));
    }
}

#[test]
fn nested_blocking_sets_give_nested_obstacles() {
    let provider = SyntheticProvider::new(32, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for scene in 0..100 {
        let map = random_label_map(&mut rng, &provider);
        let order = shuffled(&mut rng, &POTENTIAL);
        let mut prev: Option<(Mask, Mask)> = None;
        for k in 1..=order.len() {
            let profile = EmbodimentProfile::new("p", &POTENTIAL, &order[..k], 0.1).unwrap();
            let o = build_obstacle_map(&map, &profile, &provider).unwrap().blocked;
            let inflated = inflate(&o, profile.inflation_cells(0.05));
            if let Some((p, pi)) = &prev {
                assert!(p.is_subset_of(&o), "scene {scene}: blocking {:?} lost cells", &order[..k]);
                assert!(pi.is_subset_of(&inflated));
            }
            // only occupied cells can block
            assert!(o.cells().all(|c| map.is_occupied(c)));
            prev = Some((o, inflated));
        }
    }
}

#[test]
fn unknown_blocking_category_is_rejected() {
    assert!(EmbodimentProfile::new("p", &POTENTIAL, &["piano"], 0.1).is_err());
}
