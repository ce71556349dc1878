use proptest::prelude::*;
use segvoronoi::instances::{crossing_grid, obstacle, pslg_polygon, random_crossing, random_disjoint};
use segvoronoi::kernel::{count_intersections, l1_to_linf, Metric, SharingMode, SiteSet};
use segvoronoi::nearest::farthest_voronoi;
use segvoronoi::orderk::build_tower;
use segvoronoi::subdivision::LabelKind;
use segvoronoi::verify::{check_identities, oracle_agreement};

fn rotated(s: &SiteSet) -> SiteSet {
    SiteSet::new(s.mode, s.sites.iter().map(|q| (l1_to_linf(q.a), l1_to_linf(q.b))).collect()).unwrap()
}

#[test]
fn l1_matches_rotated_linf() {
    for seed in 0..4 {
        let s = random_disjoint(6, seed, 1.0).unwrap();
        let a = build_tower(&s, 5, Metric::L1).unwrap();
        let b = build_tower(&rotated(&s), 5, Metric::Linf).unwrap();
        for (x, y) in a.levels.iter().zip(&b.levels) {
            assert_eq!(x.census().unwrap(), y.census().unwrap(), "seed {seed} k={}", x.k);
        }
    }
}

#[test]
fn second_order_face_count() {
    for seed in 0..5 {
        let s = random_disjoint(7, seed, 1.0).unwrap();
        let t = build_tower(&s, 2, Metric::Euclidean).unwrap();
        let u1 = t.levels[0].census().unwrap().u;
        assert_eq!(t.levels[1].census().unwrap().f, 3 * (7 - 1) - u1);
    }
}

#[test]
fn crossing_third_order_face_count() {
    for seed in 0..4 {
        let s = random_crossing(7, 2, seed, 1.0).unwrap();
        let i = count_intersections(&s).unwrap();
        let t = build_tower(&s, 3, Metric::Euclidean).unwrap();
        let c: Vec<_> = t.levels.iter().map(|d| d.census().unwrap()).collect();
        assert_eq!(c[2].f as i64, 5 * 7 - 8 - c[0].u as i64 - c[1].u as i64 + 2 * i as i64);
    }
}

#[test]
fn crossing_grid_identities() {
    let s = crossing_grid(2, 2, 0, 1.0).unwrap();
    let t = build_tower(&s, 3, Metric::Euclidean).unwrap();
    let rep = check_identities(&t);
    assert!(rep.failures().next().is_none(), "{:?}", rep.failures().collect::<Vec<_>>());
}

#[test]
fn farthest_diagram_is_the_top_level() {
    let s = random_disjoint(5, 3, 1.0).unwrap();
    let f = farthest_voronoi(&s, &[0, 1, 2, 3, 4], Metric::Euclidean).unwrap();
    let t = build_tower(&s, 4, Metric::Euclidean).unwrap();
    assert_eq!(f.census().unwrap().e, t.levels[3].census().unwrap().e);
    assert_eq!(f.census().unwrap().f, t.levels[3].census().unwrap().f);
}

#[test]
fn obstacle_region_has_many_faces() {
    let s = obstacle(8, 3, 0, 1.0).unwrap();
    let t = build_tower(&s, 3, Metric::Euclidean).unwrap();
    let d = &t.levels[2];
    let most = d.face_ids().filter_map(|f| d.faces[f].label.clone()).map(|l| d.faces_with_label(&l).len()).max().unwrap();
    assert_eq!(most, 8 - 3 + 1);
}

#[test]
fn polygon_corners_are_type2_at_order_one() {
    let s = pslg_polygon(4, 0, 1.0).unwrap();
    assert_eq!(s.mode, SharingMode::Pslg);
    let t = build_tower(&s, 1, Metric::Euclidean).unwrap();
    let d = &t.levels[0];
    let type2 = d.face_ids().filter(|&f| d.faces[f].label.as_ref().is_some_and(|l| l.kind == LabelKind::Type2)).count();
    assert_eq!(type2, 4);
    assert!(oracle_agreement(d, &s, 2000, 1).ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_towers_satisfy_identities(n in 2usize..7, seed in 0u64..10_000, metric in prop::sample::select(vec![Metric::Euclidean, Metric::L1, Metric::Linf])) {
        let s = random_disjoint(n, seed, 1.0).unwrap();
        let t = build_tower(&s, n - 1, metric).unwrap();
        let rep = check_identities(&t);
        prop_assert!(rep.failures().next().is_none(), "{:?}", rep.failures().collect::<Vec<_>>());
        for d in &t.levels {
            prop_assert!(oracle_agreement(d, &s, 300, seed).ok());
        }
    }
}
