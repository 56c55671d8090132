mod common;

use common::contracts::{
    corruption_cases, padding_gap, persistence_bitwise, random_map, rejects_below_minimum, small_model,
    variable_length,
};
use emovox::dataset::{make_batches, BatchMode};
use emovox::nn::Rng;
use proptest::prelude::*;

#[test]
fn any_input_size_gives_a_distribution_per_sample() {
    let model = small_model(5, 4, 1);
    let worst = variable_length(&model, 6, 256, 2).unwrap();
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn default_architecture_accepts_feature_sized_inputs() {
    let model = small_model(7, 64, 3);
    let worst = variable_length(&model, 2, 40, 4).unwrap();
    assert!(worst < 1e-6);
}

#[test]
fn short_inputs_are_rejected() {
    rejects_below_minimum(&small_model(3, 2, 5)).unwrap();
}

#[test]
fn padding_never_changes_a_prediction() {
    let gap = padding_gap(&small_model(4, 4, 6), 15, 7);
    assert!(gap < 1e-6, "{gap}");
}

#[test]
fn save_load_is_bitwise() {
    persistence_bitwise(&small_model(6, 5, 8), 4, 9).unwrap();
}

#[test]
fn corrupt_files_raise_their_errors() {
    for (what, want, got) in corruption_cases(&small_model(3, 3, 10)) {
        match got {
            Err(e) => assert_eq!(e.name(), want, "{what}: {e}"),
            Ok(_) => panic!("{what}: loaded a corrupt file"),
        }
    }
}

#[test]
fn bucketed_and_padded_batches_agree() {
    let model = small_model(3, 4, 11);
    let mut rng = Rng::new(12);
    let maps: Vec<_> = (0..9).map(|i| random_map(20, 17 + (i % 3) * 5, &mut rng)).collect();
    let labels: Vec<usize> = (0..9).map(|i| i % 3).collect();
    let probs = |mode| {
        let mut out = vec![Vec::new(); maps.len()];
        for b in make_batches(&maps, &labels, 3, 4, mode, (17, 17), None).unwrap() {
            let p = model.predict_batch(&b.features, Some(&b.extents)).unwrap();
            for (row, &i) in p.data().chunks(3).zip(&b.indices) {
                out[i] = row.to_vec();
            }
        }
        out
    };
    let padded = probs(BatchMode::PadMask);
    let buckets = probs(BatchMode::EqualShapeBuckets);
    assert_eq!(padded, buckets);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn output_is_a_distribution(h in 17usize..60, w in 17usize..60, seed in any::<u64>()) {
        let model = small_model(4, 2, seed);
        let fm = random_map(h, w, &mut Rng::new(seed ^ 1));
        let p = model.predict(&fm).unwrap();
        prop_assert_eq!(p.probs.len(), 4);
        prop_assert!(p.probs.iter().all(|&q| (0.0..=1.0).contains(&q)));
        prop_assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}
