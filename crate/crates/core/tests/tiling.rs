mod common;

use damagekit::eval::{precision_recall, EvalPair};
use damagekit::interchange::{Frame, PredictionSet};
use damagekit::seed;
use damagekit::tile::{
    extract_windows, merge_instances, mock_detect, plan_tiling, MergeSettings, MockDetectorSettings,
};
use damagekit::{BinaryMask, ClassLabel, Instance, PixelRect};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn plans_cover_and_overlap(iw in 1usize..3000, ih in 1usize..3000, fw in 0.05f64..=1.0, fh in 0.05f64..=1.0, fo in 0.0f64..0.8) {
        let ww = ((iw as f64 * fw) as usize).clamp(1, iw);
        let wh = ((ih as f64 * fh) as usize).clamp(1, ih);
        let overlap = (ww.min(wh) as f64 * fo) as usize;
        let plan = plan_tiling((iw, ih), (ww, wh), overlap).unwrap();
        prop_assert_eq!(common::check_plan(&plan), Ok(()));
    }

    #[test]
    fn offsetting_preserves_area(w in 4usize..40, h in 4usize..40, dx in -10i64..10, dy in -10i64..10, seed_value: u64) {
        let mut rng = seed::stream(seed_value, "offset", 0);
        let mask = BinaryMask::from_fn(w, h, |_, _| rng.random_bool(0.3));
        // a frame large enough that no pixel is clipped
        let moved = mask.placed(w + 20, h + 20, dx + 10, dy + 10);
        prop_assert_eq!(moved.area(), mask.area());
    }
}

#[test]
fn invalid_plans_are_rejected() {
    assert!(plan_tiling((100, 100), (120, 50), 0).is_err());
    assert!(plan_tiling((100, 100), (50, 50), 50).is_err());
    assert_eq!(plan_tiling((10, 7), (10, 7), 0).unwrap().windows.len(), 1);
}

#[test]
fn shared_regions_are_identical_across_crops() {
    let mut rng = seed::stream(6, "tiles", 0);
    let image = common::random_image(&mut rng, 97, 61, 3);
    let plan = plan_tiling((97, 61), (40, 30), 9).unwrap();
    let crops = extract_windows(&image, &plan).unwrap();
    for (a, wa) in plan.windows.iter().enumerate() {
        for (b, wb) in plan.windows.iter().enumerate().skip(a + 1) {
            let (x0, y0) = (wa.x.max(wb.x), wa.y.max(wb.y));
            let (x1, y1) = ((wa.x + 40).min(wb.x + 40), (wa.y + 30).min(wb.y + 30));
            for y in y0..y1 {
                for x in x0..x1 {
                    assert_eq!(
                        crops[a].pixel(x - wa.x, y - wa.y),
                        crops[b].pixel(x - wb.x, y - wb.y),
                        "windows {a} and {b} disagree at ({x}, {y})"
                    );
                }
            }
        }
    }
}

#[test]
fn merge_matches_connected_components_oracle() {
    let mut rng = seed::stream(7, "merge-oracle", 0);
    for _ in 0..200 {
        let (w, h) = (rng.random_range(8..40), rng.random_range(8..40));
        let instances: Vec<Instance> = (0..rng.random_range(0..10))
            .map(|_| {
                let x0 = rng.random_range(0..w - 1);
                let y0 = rng.random_range(0..h - 1);
                let rect = PixelRect {
                    x0,
                    y0,
                    x1: rng.random_range(x0 + 1..=w.min(x0 + 10)),
                    y1: rng.random_range(y0 + 1..=h.min(y0 + 10)),
                };
                let class = if rng.random_bool(0.5) { ClassLabel::Damage } else { ClassLabel::Dirt };
                Instance::prediction(class, BinaryMask::rectangle(w, h, rect), rng.random_range(0.0..=1.0))
            })
            .collect();
        let merged = merge_instances(instances.clone(), &MergeSettings::default());
        let got = common::brute_merge(&merged);
        assert_eq!(got.len(), merged.len(), "merged groups still overlap");
        assert_eq!(got, common::brute_merge(&instances));
    }
}

#[test]
fn mock_false_positives_at_half_rate() {
    let (w, h) = (200, 200);
    let gt: Vec<Instance> = (0..5)
        .map(|i| {
            let rect = PixelRect { x0: 10 + 38 * i, y0: 20, x1: 20 + 38 * i, y1: 30 };
            Instance::ground_truth(ClassLabel::Damage, BinaryMask::rectangle(w, h, rect))
        })
        .collect();
    let settings = MockDetectorSettings {
        dilation_radius: 2,
        seed: 11,
        false_positive_rate: 0.5,
    };
    let predictions = mock_detect("fp", (w, h), &gt, &settings);
    assert_eq!(predictions.instances.len(), 10);
    assert_eq!(mock_detect("fp", (w, h), &gt, &settings), predictions);
    let pair = EvalPair {
        image_id: "fp".into(),
        ground_truth: gt,
        predictions,
    };
    let [np, mp, ng, dg] = common::brute_overlap_counts(std::slice::from_ref(&pair), 0.0, None);
    assert_eq!((np, mp, ng, dg), (10, 5, 5, 5));
    let pr = precision_recall(&[pair], 0.0, None).unwrap();
    assert_eq!((pr.precision, pr.recall), (Some(0.5), Some(1.0)));
}

#[test]
fn mock_dilation_of_a_square() {
    let gt = vec![Instance::ground_truth(
        ClassLabel::Dirt,
        BinaryMask::rectangle(30, 30, PixelRect { x0: 10, y0: 10, x1: 20, y1: 20 }),
    )];
    let preds = mock_detect("sq", (30, 30), &gt, &MockDetectorSettings::default());
    assert_eq!(preds.instances[0].mask.area(), 196);
    let conf = preds.instances[0].confidence.unwrap();
    assert!((0.5..=1.0).contains(&conf));
    assert_eq!(preds.frame, Frame::Full);
    let _: &PredictionSet = &preds;
}
