mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng as _;

use fsva::classifier::{
    choose_shrinkage, nsc_predict, nsc_train, nsc_train_with, stratified_folds, Classifier,
    NearestShrunkenCentroids, NscModel, Offset, Shrinkage, TrainedClassifier, DEFAULT_SHRINKAGE_GRID,
};
use fsva::{Error, ExpressionMatrix, OutcomeLabels, Persist};

use common::{normal_matrix, seeded};

/// Two classes separated by `gap` standard deviations on every feature.
fn separated(m: usize, per_class: usize, gap: f64, seed: u64) -> (ExpressionMatrix, OutcomeLabels) {
    let mut rng = seeded(seed);
    let n = 2 * per_class;
    let mut x = normal_matrix(m, n, &mut rng);
    for j in per_class..n {
        for i in 0..m {
            x[(i, j)] += gap;
        }
    }
    let labels: Vec<String> = (0..n).map(|j| if j < per_class { "a" } else { "b" }.to_string()).collect();
    (
        ExpressionMatrix::from_values(x).unwrap(),
        OutcomeLabels::from_labels(&labels).unwrap(),
    )
}

#[test]
fn well_separated_classes_are_learned() {
    let (x, y) = separated(50, 20, 5.0, 1);
    let model = nsc_train(&x, &y, 1.0).unwrap();
    assert_eq!(nsc_predict(&model, &x).unwrap().accuracy(y.labels()), 1.0);
    let (xt, yt) = separated(50, 50, 5.0, 2);
    assert!(nsc_predict(&model, &xt).unwrap().accuracy(yt.labels()) > 0.95);
}

#[test]
fn zero_threshold_keeps_class_means() {
    let (x, y) = separated(10, 4, 1.0, 3);
    let model = nsc_train(&x, &y, 0.0).unwrap();
    for i in 0..10 {
        let a: f64 = (0..4).map(|j| x.values()[(i, j)]).sum::<f64>() / 4.0;
        let b: f64 = (4..8).map(|j| x.values()[(i, j)]).sum::<f64>() / 4.0;
        assert!((model.class_centroids()[(i, 0)] - a).abs() < 1e-14);
        assert!((model.class_centroids()[(i, 1)] - b).abs() < 1e-14);
    }
    assert!((model.class_priors().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(model.pooled_sd().iter().all(|&s| s > 0.0));
}

#[test]
fn infinite_threshold_falls_back_to_priors() {
    let mut rng = seeded(4);
    let x = ExpressionMatrix::from_values(normal_matrix(8, 10, &mut rng)).unwrap();
    let labels: Vec<String> = (0..10).map(|j| if j < 3 { "rare" } else { "common" }.to_string()).collect();
    let y = OutcomeLabels::from_labels(&labels).unwrap();
    let model = nsc_train(&x, &y, f64::INFINITY).unwrap();
    assert_eq!(model.active_features(), 0);
    for k in 0..2 {
        assert_eq!(model.class_centroids().column(k), model.overall_centroid().column(0));
    }
    let test = ExpressionMatrix::from_values(normal_matrix(8, 6, &mut rng)).unwrap();
    let pred = nsc_predict(&model, &test).unwrap();
    assert!(pred.labels.iter().all(|l| l == "common"));
}

#[test]
fn ties_go_to_the_first_class() {
    let x = ExpressionMatrix::from_values(DMatrix::from_row_slice(1, 4, &[-1.0, -1.2, 1.0, 1.2])).unwrap();
    let y = OutcomeLabels::from_labels(&["a", "a", "b", "b"]).unwrap();
    let model = nsc_train(&x, &y, 0.0).unwrap();
    let mid = ExpressionMatrix::from_values(DMatrix::from_row_slice(1, 1, &[0.0])).unwrap();
    assert_eq!(nsc_predict(&model, &mid).unwrap().labels, vec!["a"]);
    let at_b = ExpressionMatrix::from_values(DMatrix::from_row_slice(1, 1, &[1.1])).unwrap();
    assert_eq!(nsc_predict(&model, &at_b).unwrap().labels, vec!["b"]);
}

#[test]
fn small_classes_are_rejected() {
    let mut rng = seeded(5);
    let x = ExpressionMatrix::from_values(normal_matrix(4, 5, &mut rng)).unwrap();
    let y = OutcomeLabels::from_labels(&["a", "a", "a", "a", "b"]).unwrap();
    assert!(matches!(nsc_train(&x, &y, 0.0), Err(Error::ClassTooSmall { count: 1, .. })));
    let y = OutcomeLabels::from_labels(&["a", "a", "a", "b", "b"]).unwrap();
    assert!(matches!(stratified_folds(&y, 3, 0), Err(Error::ClassTooSmall { .. })));
}

#[test]
fn singleton_grid_is_returned() {
    let (x, y) = separated(10, 6, 1.0, 6);
    assert_eq!(choose_shrinkage(&x, &y, 3, &[0.0], 1).unwrap(), 0.0);
}

#[test]
fn separated_classes_pick_a_useful_threshold() {
    let (x, y) = separated(40, 15, 3.0, 7);
    let delta = choose_shrinkage(&x, &y, 5, &DEFAULT_SHRINKAGE_GRID, 2).unwrap();
    let model = nsc_train(&x, &y, delta).unwrap();
    let (xt, yt) = separated(40, 50, 3.0, 8);
    assert!(nsc_predict(&model, &xt).unwrap().accuracy(yt.labels()) >= 0.95);
}

#[test]
fn pure_noise_is_near_chance() {
    // Monte Carlo: with no signal the cross-validated model should be no
    // better than the majority rate on fresh data.
    let mut total = 0.0;
    for rep in 0..10u64 {
        let (x, y) = separated(30, 10, 0.0, 100 + rep);
        let clf = NearestShrunkenCentroids::default();
        let model = clf.train(&x, &y, rep).unwrap();
        let (xt, yt) = separated(30, 50, 0.0, 200 + rep);
        let pred = model.predict_labels(&xt).unwrap();
        total += pred.iter().zip(yt.labels()).filter(|(p, t)| p == t).count() as f64 / 100.0;
    }
    let mean = total / 10.0;
    assert!((mean - 0.5).abs() < 0.08, "mean accuracy {mean}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn active_features_shrink_with_the_threshold(seed in any::<u64>()) {
        let (x, y) = separated(25, 6, 0.8, seed);
        let counts: Vec<usize> = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&d| nsc_train(&x, &y, d).unwrap().active_features())
            .collect();
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{:?}", counts);
    }

    #[test]
    fn feature_scaling_leaves_predictions_unchanged(seed in any::<u64>(), delta in 0.0f64..2.0) {
        let (x, y) = separated(12, 6, 1.0, seed);
        let mut rng = seeded(seed ^ 1);
        let scales: Vec<f64> = (0..12).map(|_| rng.random_range(0.1..10.0)).collect();
        let test = ExpressionMatrix::from_values(normal_matrix(12, 8, &mut rng)).unwrap();
        let scale = |e: &ExpressionMatrix| {
            let mut v = e.values().clone();
            for (i, mut row) in v.row_iter_mut().enumerate() {
                row *= scales[i];
            }
            ExpressionMatrix::from_values(v).unwrap()
        };
        let a = nsc_train_with(&x, &y, delta, Offset::Fixed(0.0)).unwrap();
        let b = nsc_train_with(&scale(&x), &y, delta, Offset::Fixed(0.0)).unwrap();
        let pa = nsc_predict(&a, &test).unwrap();
        let pb = nsc_predict(&b, &scale(&test)).unwrap();
        // Compare scores so near-ties do not make the check flaky.
        prop_assert!((pa.scores - pb.scores).abs().max() < 1e-8);
    }

    #[test]
    fn models_round_trip(seed in any::<u64>(), delta in prop_oneof![Just(f64::INFINITY), 0.0f64..3.0]) {
        let (x, y) = separated(7, 4, 1.0, seed);
        let model = nsc_train(&x, &y, delta).unwrap();
        let text = model.to_json().unwrap();
        let back = NscModel::from_json(&text).unwrap();
        prop_assert_eq!(&back, &model);
        prop_assert_eq!(back.to_json().unwrap(), text);
    }
}

#[test]
fn misaligned_samples_are_rejected() {
    let (x, y) = separated(5, 3, 1.0, 9);
    let model = nsc_train(&x, &y, 0.0).unwrap();
    let mut rng = seeded(10);
    let wrong = ExpressionMatrix::from_values(normal_matrix(4, 2, &mut rng)).unwrap();
    assert!(nsc_predict(&model, &wrong).is_err());
}

#[test]
fn classifier_trait_uses_fixed_or_cv_threshold() {
    let (x, y) = separated(20, 10, 2.0, 11);
    let fixed = NearestShrunkenCentroids { shrinkage: Shrinkage::Fixed(0.5), ..Default::default() };
    assert_eq!(fixed.train(&x, &y, 0).unwrap().shrinkage(), 0.5);
    let cv = NearestShrunkenCentroids::default();
    let a = cv.train(&x, &y, 3).unwrap();
    let b = cv.train(&x, &y, 3).unwrap();
    assert_eq!(a, b);
    assert!(DEFAULT_SHRINKAGE_GRID.contains(&a.shrinkage()));
}
