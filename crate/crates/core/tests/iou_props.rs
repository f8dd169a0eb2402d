use std::f64::consts::{FRAC_PI_2, PI};

use elgauss_core::iou::{aggregate, iou_grid, iou_oracle, match_and_score};
use elgauss_core::Ellipse;
use proptest::prelude::*;

fn ellipse(center: f64, axes: std::ops::Range<f64>) -> impl Strategy<Value = Ellipse> {
    (-center..center, -center..center, axes.clone(), axes, -FRAC_PI_2..FRAC_PI_2)
        .prop_map(|(cx, cy, rx, ry, t)| Ellipse::new(cx, cy, rx, ry, t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn grid_agrees_with_oracle(a in ellipse(40.0, 8.0..80.0), b in ellipse(40.0, 8.0..80.0)) {
        let g = iou_grid(&a, &b).unwrap().iou;
        let o = iou_oracle(&a, &b, 1024).unwrap();
        prop_assert!((g - o).abs() < 0.02, "grid {g} oracle {o}");
    }

    #[test]
    fn grid_is_symmetric_and_bounded(a in ellipse(30.0, 1.0..40.0), b in ellipse(30.0, 1.0..40.0)) {
        let ab = iou_grid(&a, &b).unwrap();
        let ba = iou_grid(&b, &a).unwrap();
        prop_assert_eq!(ab.iou, ba.iou);
        prop_assert!((0.0..=1.0).contains(&ab.iou));
        prop_assert!(ab.intersection_samples <= ab.union_samples);
    }

    #[test]
    fn self_iou_is_one(a in ellipse(100.0, 0.3..60.0)) {
        prop_assert_eq!(iou_grid(&a, &a).unwrap().iou, 1.0);
    }

    #[test]
    fn scale_invariance(a in ellipse(20.0, 10.0..40.0), b in ellipse(20.0, 10.0..40.0), s in 1.5..3.0f64) {
        let base = iou_grid(&a, &b).unwrap().iou;
        let scaled = iou_grid(&a.scaled(s), &b.scaled(s)).unwrap().iou;
        prop_assert!((base - scaled).abs() < 0.03, "{base} vs {scaled}");
    }

    #[test]
    fn rigid_motion_invariance(a in ellipse(20.0, 10.0..40.0), b in ellipse(20.0, 10.0..40.0), angle in -PI..PI, dx in -50.0..50.0f64) {
        let base = iou_grid(&a, &b).unwrap().iou;
        let pivot = a.center();
        let ra = a.rotated_about(pivot, angle).translated(dx, -dx);
        let rb = b.rotated_about(pivot, angle).translated(dx, -dx);
        let moved = iou_grid(&ra, &rb).unwrap().iou;
        prop_assert!((base - moved).abs() < 0.03, "{base} vs {moved}");
    }

    #[test]
    fn contained_iou_is_area_ratio(a in ellipse(50.0, 20.0..60.0), f in 0.3..0.9f64) {
        // Same shape shrunk about its center lies inside.
        let inner = Ellipse { rx: a.rx * f, ry: a.ry * f, ..a };
        let got = iou_grid(&a, &inner).unwrap().iou;
        prop_assert!((got - f * f).abs() < 0.02, "{got} vs {}", f * f);
    }

    #[test]
    fn matching_is_one_to_one(
        dets in prop::collection::vec(ellipse(60.0, 5.0..30.0), 0..6),
        gts in prop::collection::vec(ellipse(60.0, 5.0..30.0), 0..6),
        min_iou in 0.0..0.5f64,
    ) {
        let r = match_and_score(&dets, &gts, min_iou).unwrap();
        let mut d: Vec<usize> = r.pairs.iter().map(|p| p.det).collect();
        let mut g: Vec<usize> = r.pairs.iter().map(|p| p.gt).collect();
        d.extend(&r.unmatched_detections);
        g.extend(&r.unmatched_ground_truths);
        d.sort();
        g.sort();
        prop_assert_eq!(d, (0..dets.len()).collect::<Vec<_>>());
        prop_assert_eq!(g, (0..gts.len()).collect::<Vec<_>>());
        prop_assert!(r.pairs.iter().all(|p| p.iou > min_iou));
        prop_assert!(r.mean_iou_penalized <= r.mean_iou_matched + 1e-12);
        let m = aggregate([&r]);
        prop_assert!((m.mean_iou_penalized - r.mean_iou_penalized).abs() < 1e-12);
    }
}

#[test]
fn disjoint_and_oracle_floor() {
    let a = Ellipse::circle(0.0, 0.0, 5.0);
    let b = Ellipse::circle(100.0, 0.0, 5.0);
    assert_eq!(iou_grid(&a, &b).unwrap().iou, 0.0);
    assert_eq!(iou_oracle(&a, &b, 256).unwrap(), 0.0);
    assert!(iou_oracle(&a, &b, 100).is_err());
}

#[test]
fn identical_sets_score_one() {
    let set = vec![
        Ellipse::new(10.0, 10.0, 8.0, 4.0, 0.3).unwrap(),
        Ellipse::new(40.0, 15.0, 6.0, 6.0, 0.0).unwrap(),
        Ellipse::new(25.0, 45.0, 12.0, 3.0, -1.2).unwrap(),
    ];
    let r = match_and_score(&set, &set, 0.5).unwrap();
    assert_eq!(r.pairs.len(), 3);
    assert!(r.pairs.iter().all(|p| p.det == p.gt));
    assert_eq!(r.mean_iou_penalized, 1.0);
    let empty = match_and_score(&[], &set, 0.5).unwrap();
    assert_eq!(empty.mean_iou_penalized, 0.0);
    assert_eq!(empty.unmatched_ground_truths, vec![0, 1, 2]);
}
