//! Property tests over randomly generated inputs.

use hmua_core::ndarray::Array2;
use hmua_core::types::{AbundanceMap, HomogeneityParams};
use hmua_core::{homogeneity, scalespace, synth};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

mod support;

fn segmentation_strategy() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..8, 1usize..8, 1usize..10, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// uncoarsen then coarsen is the identity on the coarse domain, and the
    /// averaging projection is idempotent.
    #[test]
    fn scale_operators_project((rows, cols, k, seed) in segmentation_strategy(),
                               values in proptest::collection::vec(-100.0f64..100.0, 1..64)) {
        let mut rng = StdRng::seed_from_u64(seed);
        let seg = support::random_segmentation(&mut rng, rows, cols, k);
        let op = scalespace::build_operator(&seg);
        let k = op.label_count();
        let bands = 1 + values.len() % 3;
        let mc = Array2::from_shape_fn((bands, k), |(b, j)| {
            values[(b * k + j) % values.len()]
        });
        let fine = scalespace::uncoarsen(&mc.view(), &op).unwrap();
        let back = scalespace::coarsen(&fine.view(), &op).unwrap();
        for (a, b) in back.iter().zip(mc.iter()) {
            prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    /// The homogeneity deviation is invariant to positive scaling of the
    /// distance vector.
    #[test]
    fn deviation_scale_invariant(d in proptest::collection::vec(0.0f64..50.0, 1..40),
                                 scale in 1e-3f64..1e3,
                                 tau in 0.0f64..0.9) {
        let params = HomogeneityParams::new(tau, 0.25).unwrap();
        let (a, _) = homogeneity::homogeneity_deviation(&d, &params).unwrap();
        let scaled: Vec<f64> = d.iter().map(|v| v * scale).collect();
        let (b, _) = homogeneity::homogeneity_deviation(&scaled, &params).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b} at scale {scale}");
    }

    /// SRE is invariant under joint scaling of truth and estimate.
    #[test]
    fn sre_joint_scale_invariant(values in proptest::collection::vec(0.0f64..1.0, 4..32),
                                 scale in 1e-2f64..1e2) {
        let n = values.len() / 2;
        prop_assume!(n >= 1);
        let truth = Array2::from_shape_fn((2, n), |(i, j)| values[i * n + j]);
        prop_assume!(truth.iter().any(|&v| v > 0.0));
        let estimate = truth.mapv(|v| (v * 0.9 + 0.01).max(0.0));
        let a = synth::sre(
            &AbundanceMap::new(truth.clone()).unwrap(),
            &AbundanceMap::new(estimate.clone()).unwrap(),
        )
        .unwrap();
        let b = synth::sre(
            &AbundanceMap::new(truth.mapv(|v| v * scale)).unwrap(),
            &AbundanceMap::new(estimate.mapv(|v| v * scale)).unwrap(),
        )
        .unwrap();
        if a.is_finite() {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        } else {
            prop_assert!(b.is_infinite());
        }
    }

    /// Canonical relabeling is idempotent for any connected segmentation.
    #[test]
    fn canonical_is_idempotent((rows, cols, k, seed) in segmentation_strategy()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let seg = support::random_segmentation(&mut rng, rows, cols, k);
        let once = seg.canonical();
        let twice = once.canonical();
        prop_assert_eq!(once.labels(), twice.labels());
    }
}
