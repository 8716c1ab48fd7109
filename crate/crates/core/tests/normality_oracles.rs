//! Normality math checked against naive index-loop oracles.

use mon_core::{
    build_mon, calibration_vectors, distance_heatmap, image_score, Dims, DistanceHeatmap,
    FeatureTensor, ModelOfNormality,
};
use proptest::prelude::*;
use proptest::strategy::ValueTree;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

fn oracle_mean(features: &[FeatureTensor]) -> Vec<f64> {
    let d = features[0].dims();
    let mut out = Vec::new();
    for h in 0..d.height {
        for w in 0..d.width {
            for c in 0..d.channels {
                let mut s = 0.0f64;
                for t in features {
                    s += t.get(h, w, c) as f64;
                }
                out.push(s / features.len() as f64);
            }
        }
    }
    out
}

fn oracle_heatmap(a: &FeatureTensor, m: &FeatureTensor) -> Vec<f64> {
    let d = a.dims();
    let mut out = Vec::new();
    for h in 0..d.height {
        for w in 0..d.width {
            let mut s = 0.0f64;
            for c in 0..d.channels {
                let diff = a.get(h, w, c) as f64 - m.get(h, w, c) as f64;
                s += diff * diff;
            }
            out.push(s.sqrt());
        }
    }
    out
}

fn oracle_mean_max(v: &[f64]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut max = v[0];
    for &x in v {
        sum += x;
        if x > max {
            max = x;
        }
    }
    (sum / v.len() as f64, max)
}

fn tensors(dims: Dims, n: usize) -> impl Strategy<Value = Vec<FeatureTensor>> {
    proptest::collection::vec(
        proptest::collection::vec(-10.0f32..10.0, dims.len())
            .prop_map(move |v| FeatureTensor::new(dims, v).unwrap()),
        n,
    )
}

fn pool() -> impl Strategy<Value = Vec<FeatureTensor>> {
    (1usize..=8, 1usize..=8, 1usize..=16, 1usize..=8)
        .prop_flat_map(|(h, w, c, n)| tensors(Dims::new(h, w, c), n))
}

#[test]
fn five_random_tensors_mean() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let features = tensors(Dims::new(2, 2, 3), 5)
        .new_tree(&mut runner)
        .unwrap()
        .current();
    let mon = build_mon(&features).unwrap();
    for (got, want) in mon.tensor().values().iter().zip(oracle_mean(&features)) {
        assert!(rel_close(*got as f64, want, 1e-6), "{got} vs {want}");
    }
}

#[test]
fn random_heatmap_matches_loop() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let pair = tensors(Dims::new(4, 4, 8), 2)
        .new_tree(&mut runner)
        .unwrap()
        .current();
    let mon = ModelOfNormality::from_parts(pair[1].clone(), 1).unwrap();
    let hm = distance_heatmap(&pair[0], &mon).unwrap();
    for (got, want) in hm.values().iter().zip(oracle_heatmap(&pair[0], &pair[1])) {
        assert!(rel_close(*got, want, 1e-6));
    }
}

proptest! {
    #[test]
    fn reductions_match_oracle(values in proptest::collection::vec(0.0f64..100.0, 196)) {
        let hm = DistanceHeatmap::from_values(14, 14, values.clone()).unwrap();
        let s = image_score(&hm);
        let (mean, max) = oracle_mean_max(&values);
        prop_assert_eq!(s.d_max, max);
        prop_assert!(rel_close(s.d_mean, mean, 1e-9));
    }

    #[test]
    fn pipeline_matches_oracles(features in pool()) {
        let mon = build_mon(&features).unwrap();
        let mean = oracle_mean(&features);
        for (got, want) in mon.tensor().values().iter().zip(&mean) {
            prop_assert!(rel_close(*got as f64, *want, 1e-6) || (*got as f64 - want).abs() < 1e-6);
        }
        let cal = calibration_vectors(&mon, &features).unwrap();
        prop_assert_eq!(cal.len(), features.len());
        for (i, t) in features.iter().enumerate() {
            let hm = oracle_heatmap(t, mon.tensor());
            let (m, x) = oracle_mean_max(&hm);
            prop_assert!(rel_close(cal.d_mean()[i], m, 1e-6));
            prop_assert!(rel_close(cal.d_max()[i], x, 1e-6));
            prop_assert!(cal.d_mean()[i] <= cal.d_max()[i]);
        }
    }

    #[test]
    fn mon_lies_within_input_range(features in pool()) {
        let mon = build_mon(&features).unwrap();
        for (k, &m) in mon.tensor().values().iter().enumerate() {
            let lo = features.iter().map(|t| t.values()[k]).fold(f32::INFINITY, f32::min);
            let hi = features.iter().map(|t| t.values()[k]).fold(f32::NEG_INFINITY, f32::max);
            prop_assert!(lo <= m && m <= hi);
        }
    }

    #[test]
    fn mon_is_permutation_invariant(features in pool(), seed in any::<u64>()) {
        let mut shuffled = features.clone();
        // Fisher-Yates with a tiny LCG so the permutation is reproducible
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = build_mon(&features).unwrap();
        let b = build_mon(&shuffled).unwrap();
        for (x, y) in a.tensor().values().iter().zip(b.tensor().values()) {
            prop_assert!(rel_close(*x as f64, *y as f64, 1e-6) || (x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn heatmap_scales_with_inputs(pair in tensors(Dims::new(4, 4, 8), 2), e in -6i32..6, zero in any::<bool>()) {
        // powers of two keep the scaled f32 inputs exact, so any mismatch is
        // the distance computation's
        let k = if zero { 0.0 } else { 2f32.powi(e) };
        let scale = |t: &FeatureTensor| {
            FeatureTensor::new(t.dims(), t.values().iter().map(|v| v * k).collect()).unwrap()
        };
        let mon = ModelOfNormality::from_parts(pair[1].clone(), 1).unwrap();
        let mon_k = ModelOfNormality::from_parts(scale(&pair[1]), 1).unwrap();
        let base = distance_heatmap(&pair[0], &mon).unwrap();
        let scaled = distance_heatmap(&scale(&pair[0]), &mon_k).unwrap();
        for (b, s) in base.values().iter().zip(scaled.values()) {
            let want = b * k as f64;
            prop_assert!(rel_close(*s, want, 1e-6) || (s - want).abs() < 1e-9);
        }
    }

    #[test]
    fn heatmap_obeys_triangle_inequality(t in tensors(Dims::new(4, 4, 8), 3)) {
        let (a, b, m) = (&t[0], &t[1], &t[2]);
        let mon = ModelOfNormality::from_parts(m.clone(), 1).unwrap();
        let da = distance_heatmap(a, &mon).unwrap();
        let db = distance_heatmap(b, &mon).unwrap();
        let dab = oracle_heatmap(a, b);
        for ((x, y), bound) in da.values().iter().zip(db.values()).zip(&dab) {
            prop_assert!((x - y).abs() <= bound + 1e-6);
        }
    }

    #[test]
    fn identical_pool_has_zero_distances(t in tensors(Dims::new(3, 5, 7), 1), n in 1usize..8) {
        let features = vec![t[0].clone(); n];
        let mon = build_mon(&features).unwrap();
        let hm = distance_heatmap(&t[0], &mon).unwrap();
        prop_assert!(hm.values().iter().all(|v| *v <= 1e-6));
        let cal = calibration_vectors(&mon, &features).unwrap();
        prop_assert!(cal.d_max().iter().chain(cal.d_mean()).all(|v| *v <= 1e-6));
    }
}
