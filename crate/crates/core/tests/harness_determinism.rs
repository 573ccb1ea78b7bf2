//! Seed determinism and bookkeeping of the synthetic generator.

use proptest::prelude::*;
use vtmot::harness::{expected_counts, generate_synthetic_sequence, HarnessError, Motion, ScenarioSpec};
use vtmot::mot_data::{serialize_annotations, serialize_detections};

fn motion() -> impl Strategy<Value = Motion> {
    prop_oneof![Just(Motion::Linear), Just(Motion::Crossing), Just(Motion::Stationary)]
}

#[test]
fn drop_rate_one_removes_everything() {
    let spec = ScenarioSpec::new("s", 3, 20, Motion::Stationary, 4).with_noise(1.0, 0.0, 0.0);
    let seq = generate_synthetic_sequence(&spec).unwrap();
    assert!(seq.all_detections().is_empty());
}

#[test]
fn dropped_set_is_reproducible() {
    let spec = ScenarioSpec::new("s", 6, 50, Motion::Linear, 99).with_noise(0.1, 0.0, 0.0);
    let a = generate_synthetic_sequence(&spec).unwrap();
    let b = generate_synthetic_sequence(&spec).unwrap();
    assert!(!a.dropped_boxes().is_empty());
    assert_eq!(a.dropped_boxes(), b.dropped_boxes());
    assert_eq!(expected_counts(&spec, &a).unwrap().fn_, a.dropped_boxes().len() as u64);
}

#[test]
fn dropped_set_ignores_jitter() {
    let base = ScenarioSpec::new("s", 4, 30, Motion::Crossing, 5).with_noise(0.25, 0.0, 0.0);
    let noisy = base.clone().with_noise(0.25, 2.0, 0.0);
    let a = generate_synthetic_sequence(&base).unwrap();
    let b = generate_synthetic_sequence(&noisy).unwrap();
    assert_eq!(a.dropped_boxes(), b.dropped_boxes());
}

#[test]
fn invalid_specs_are_rejected() {
    for spec in [
        ScenarioSpec::new("s", 0, 10, Motion::Linear, 0),
        ScenarioSpec::new("s", 2, 10, Motion::Linear, 0).with_noise(1.5, 0.0, 0.0),
        ScenarioSpec::new("s", 2, 10, Motion::Linear, 0).with_noise(0.0, -1.0, 0.0),
        ScenarioSpec::new("s", 200, 10, Motion::Linear, 0),
    ] {
        assert!(matches!(
            generate_synthetic_sequence(&spec),
            Err(HarnessError::InvalidSpec(_))
        ));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn identical_seed_gives_identical_bytes(
        seed in any::<u64>(),
        motion in motion(),
        n_tracks in 1u32..8,
        drop in 0.0f64..1.0,
        fp in 0.0f64..3.0,
    ) {
        let spec = ScenarioSpec::new("s", n_tracks, 25, motion, seed).with_noise(drop, 1.0, fp);
        let a = generate_synthetic_sequence(&spec).unwrap();
        let b = generate_synthetic_sequence(&spec).unwrap();
        prop_assert_eq!(serialize_annotations(&a.gt), serialize_annotations(&b.gt));
        prop_assert_eq!(serialize_detections(&a.all_detections()), serialize_detections(&b.all_detections()));
        prop_assert_eq!(a.gt.len(), (n_tracks * 25) as usize);
    }

    #[test]
    fn detections_carry_consistent_sources(seed in any::<u64>(), motion in motion()) {
        let spec = ScenarioSpec::new("s", 5, 20, motion, seed).with_noise(0.3, 0.0, 1.2);
        let seq = generate_synthetic_sequence(&spec).unwrap();
        let c = expected_counts(&spec, &seq).unwrap();
        prop_assert_eq!(c.n_gt, 100);
        prop_assert_eq!(seq.all_detections().len() as u64, c.n_gt - c.fn_ + c.fp);
        for (k, (dets, srcs)) in seq.detections.iter().zip(&seq.sources).enumerate() {
            prop_assert_eq!(dets.len(), srcs.len());
            for (d, s) in dets.iter().zip(srcs) {
                prop_assert_eq!(d.frame, k as u32 + 1);
                if let Some(id) = s {
                    let gt = seq.gt.frame(d.frame).iter().find(|r| r.track_id == *id).unwrap();
                    prop_assert_eq!(gt.bbox, d.bbox);
                }
            }
        }
    }
}
