use biogate::ensemble::{
    self, forward_feature_selection, importance_ordered_ablation, train, AblationOrder, AblationPlan,
    Algorithm, Hyperparams, Metrics, TrainedModel,
};
use biogate::features::{feature_names, FeatureMatrix, FeatureVector, N_FEATURES};
use biogate::rng;
use biogate::signal::ClassLabel::{self, *};
use biogate::Error;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

fn hp(algorithm: Algorithm) -> Hyperparams {
    Hyperparams::for_algorithm(algorithm)
}

fn accuracy(model: &TrainedModel, x: &FeatureMatrix, y: &[ClassLabel]) -> f64 {
    Metrics::compute(y, &model.predict_matrix(x).unwrap()).accuracy
}

fn threshold_data() -> (FeatureMatrix, Vec<ClassLabel>) {
    let mut r = rng::stream(1, &[]);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..200 {
        let v: f64 = if i < 100 { -r.random_range(0.01..5.0) } else { 1.0 + r.random_range(0.01..5.0) };
        rows.push([v]);
        y.push(if i < 100 { Ecg } else { Eeg });
    }
    (FeatureMatrix::from_rows(names(1), &rows).unwrap(), y)
}

fn xor_data(seed: u64) -> (FeatureMatrix, Vec<ClassLabel>) {
    let mut r = rng::stream(seed, &[]);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (cx, cy) in [(0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)] {
        for _ in 0..50 {
            let dx: f64 = StandardNormal.sample(&mut r);
            let dy: f64 = StandardNormal.sample(&mut r);
            rows.push([cx + 0.1 * dx, cy + 0.1 * dy]);
            y.push(if cx == cy { Ecg } else { NonBio });
        }
    }
    (FeatureMatrix::from_rows(names(2), &rows).unwrap(), y)
}

/// Feature 0 carries the class, features 1.. are pure noise.
fn one_informative(n_noise: usize, n_per_class: usize, seed: u64) -> (FeatureMatrix, Vec<ClassLabel>) {
    let mut r = rng::stream(seed, &[]);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (k, label) in [Ecg, Eeg, BMov, NonBio].into_iter().enumerate() {
        for _ in 0..n_per_class {
            let mut row = vec![k as f64 * 3.0 + r.random_range(0.0..1.0)];
            row.extend((0..n_noise).map(|_| r.random_range(0.0..1.0)));
            rows.push(row);
            y.push(label);
        }
    }
    (FeatureMatrix::from_rows(names(n_noise + 1), &rows).unwrap(), y)
}

#[test]
fn threshold_separable_data_is_fit_perfectly() {
    let (x, y) = threshold_data();
    for a in Algorithm::ALL {
        let m = train(&x, &y, a, &hp(a), 3).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0, "{a}");
    }
}

#[test]
fn xor_is_learned() {
    let (x, y) = xor_data(2);
    for a in Algorithm::ALL {
        let mut h = hp(a);
        h.n_trees = if a.is_boosted() { 20 } else { 100 };
        let m = train(&x, &y, a, &h, 4).unwrap();
        let acc = accuracy(&m, &x, &y);
        assert!(acc >= 0.99, "{a}: {acc}");
    }
}

#[test]
fn single_tree_pure_leaf_gives_certainty() {
    let (x, y) = threshold_data();
    let h = Hyperparams { n_trees: 1, ..hp(Algorithm::RandomForest) };
    let m = train(&x, &y, Algorithm::RandomForest, &h, 0).unwrap();
    assert_eq!(m.predict_proba_row(&[-100.0]), vec![1.0, 0.0]);
    assert_eq!(m.predict_proba_row(&[100.0]), vec![0.0, 1.0]);
}

#[test]
fn probabilities_are_normalized() {
    let (x, y) = one_informative(N_FEATURES - 1, 30, 9);
    let x = FeatureMatrix::from_rows(feature_names(), &x.rows().collect::<Vec<_>>()).unwrap();
    let mut r = rng::stream(77, &[]);
    for a in Algorithm::ALL {
        let m = train(&x, &y, a, &hp(a), 1).unwrap();
        for _ in 0..1000 {
            let mut values = [0.0; N_FEATURES];
            values.iter_mut().for_each(|v| *v = r.random_range(-2.0..14.0));
            let p = m.predict_proba(&FeatureVector { values }).unwrap();
            assert_eq!(p.len(), 4);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn zero_boosting_rounds_give_uniform_probabilities() {
    let (x, y) = one_informative(2, 20, 1);
    for a in [Algorithm::GbtExact, Algorithm::GbtHistogram] {
        let m = train(&x, &y, a, &hp(a), 0).unwrap().truncated(0);
        assert_eq!(m.n_rounds(), 0);
        assert_eq!(m.predict_proba_row(&[0.5, 0.5, 0.5]), vec![0.25; 4]);
    }
}

#[test]
fn importance_finds_the_informative_feature() {
    let (x, y) = one_informative(11, 60, 5);
    for a in Algorithm::ALL {
        let m = train(&x, &y, a, &hp(a), 2).unwrap();
        let imp = m.feature_importance();
        assert_eq!(imp.len(), 12);
        assert!((imp.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-9);
        let top = imp.iter().map(|p| p.1).fold(0.0, f64::max);
        assert_eq!(imp[0].1, top, "{a}");
        if a.is_boosted() {
            assert!(imp[0].1 > 0.9, "{a}: {}", imp[0].1);
        } else {
            // with sqrt(F) candidates most nodes never see feature 0, and the
            // noise splits made there keep a sizeable share of the gain
            assert!(imp[0].1 > 0.5, "{a}: {}", imp[0].1);
        }
    }
    let h = Hyperparams { max_features: Some(12), ..hp(Algorithm::RandomForest) };
    let m = train(&x, &y, Algorithm::RandomForest, &h, 2).unwrap();
    assert!(m.feature_importance()[0].1 > 0.9);
}

#[test]
fn permutation_importance_of_noise_is_near_zero() {
    let (x, y) = one_informative(3, 60, 6);
    let (xv, yv) = one_informative(3, 60, 7);
    for a in Algorithm::ALL {
        let m = train(&x, &y, a, &hp(a), 2).unwrap();
        let imp = m.permutation_importance(&xv, &yv, 10, 8).unwrap();
        assert!(imp[0].1 > 0.5, "{a}: {imp:?}");
        for (name, v) in &imp[1..] {
            assert!(v.abs() <= 0.02, "{a} {name}: {v}");
        }
    }
}

#[test]
fn forward_selection_picks_informative_feature_first() {
    let (x, y) = one_informative(2, 40, 10);
    let h = Hyperparams { n_trees: 20, ..hp(Algorithm::RandomForest) };
    let t = forward_feature_selection(&x, &y, Algorithm::RandomForest, &h, 1).unwrap();
    assert_eq!(t.order[0], 0);
    assert_eq!(t.order.len(), 3);
    assert_eq!(t.accuracy[0], 1.0);
}

#[test]
fn forward_selection_accuracy_rises_on_separable_data() {
    // classes are the four quadrants of (f0, f1); f2 is noise
    let mut r = rng::stream(12, &[]);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (k, label) in [Ecg, Eeg, BMov, NonBio].into_iter().enumerate() {
        for _ in 0..40 {
            let a = (k % 2) as f64 * 2.0 + r.random_range(0.0..1.0);
            let b = (k / 2) as f64 * 2.0 + r.random_range(0.0..1.0);
            rows.push([a, b, r.random_range(0.0..1.0)]);
            y.push(label);
        }
    }
    let x = FeatureMatrix::from_rows(names(3), &rows).unwrap();
    for a in Algorithm::ALL {
        let mut h = hp(a);
        h.n_trees = 30;
        let t = forward_feature_selection(&x, &y, a, &h, 3).unwrap();
        assert!(t.order[..2].contains(&0) && t.order[..2].contains(&1), "{a}: {:?}", t.order);
        assert!(t.accuracy[1] >= t.accuracy[0], "{a}: {:?}", t.accuracy);
        assert_eq!(t.accuracy[1], 1.0);
    }
}

#[test]
fn duplicate_feature_ties_break_by_index() {
    let (base, y) = one_informative(1, 40, 11);
    let rows: Vec<Vec<f64>> = base.rows().map(|r| vec![r[1], r[0], r[0]]).collect();
    let x = FeatureMatrix::from_rows(names(3), &rows).unwrap();
    let h = Hyperparams { n_trees: 20, ..hp(Algorithm::GbtExact) };
    let t = forward_feature_selection(&x, &y, Algorithm::GbtExact, &h, 2).unwrap();
    assert_eq!(t.order[0], 1);
}

#[test]
fn full_ablation_cell_matches_plain_training() {
    let (x, y) = one_informative(11, 40, 13);
    let (xt, yt) = one_informative(11, 20, 14);
    let x = FeatureMatrix::from_rows(feature_names(), &x.rows().collect::<Vec<_>>()).unwrap();
    let xt = FeatureMatrix::from_rows(feature_names(), &xt.rows().collect::<Vec<_>>()).unwrap();
    let a = Algorithm::GbtHistogram;
    let plan = AblationPlan {
        feature_counts: vec![1, 12],
        samples_per_class: vec![None, Some(10)],
        order: AblationOrder::LeastImportantFirst,
    };
    let cells = importance_ordered_ablation(&x, &y, &xt, &yt, a, &hp(a), &plan, 4).unwrap();
    assert_eq!(cells.len(), 4);
    let plain = accuracy(&train(&x, &y, a, &hp(a), 4).unwrap(), &xt, &yt);
    assert_eq!(cells[1].accuracy, plain);
    // the least important single feature is noise
    assert!(cells[0].accuracy < cells[1].accuracy);
    assert_eq!(cells[0].features.len(), 1);
    assert_ne!(cells[0].features[0], "fuzzyen_m1");

    let too_many = AblationPlan { samples_per_class: vec![Some(41)], ..plan };
    assert!(matches!(
        importance_ordered_ablation(&x, &y, &xt, &yt, a, &hp(a), &too_many, 4),
        Err(Error::InsufficientSamples(_))
    ));
}

#[test]
fn training_preconditions() {
    let x = FeatureMatrix::from_rows(names(1), &[[1.0], [2.0], [3.0]]).unwrap();
    assert!(matches!(
        train(&x, &[Ecg, Ecg, Ecg], Algorithm::RandomForest, &Hyperparams::default(), 0),
        Err(Error::SingleClassTraining)
    ));
    let bad = FeatureMatrix::from_rows(names(1), &[[1.0], [f64::NAN], [3.0]]).unwrap();
    assert!(matches!(
        train(&bad, &[Ecg, Eeg, Ecg], Algorithm::GbtExact, &hp(Algorithm::GbtExact), 0),
        Err(Error::NonFiniteFeature { row: 1, col: 0 })
    ));
    let h = Hyperparams { learning_rate: 0.0, ..Hyperparams::default() };
    assert!(train(&x, &[Ecg, Eeg, Ecg], Algorithm::GbtExact, &h, 0).is_err());
}

#[test]
fn fingerprint_mismatch_is_refused() {
    let (x, y) = one_informative(2, 10, 1);
    let m = train(&x, &y, Algorithm::RandomForest, &Hyperparams::default(), 0).unwrap();
    let fv = FeatureVector { values: [0.0; N_FEATURES] };
    assert!(matches!(m.predict_proba(&fv), Err(Error::FingerprintMismatch { .. })));
    let renamed = FeatureMatrix::from_rows(vec!["a".into(), "b".into(), "c".into()], &[[0.0; 3]]).unwrap();
    assert!(m.predict_matrix(&renamed).is_err());
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = one_informative(11, 30, 21);
    let x = FeatureMatrix::from_rows(feature_names(), &x.rows().collect::<Vec<_>>()).unwrap();
    let mut r = rng::stream(22, &[]);
    let probes: Vec<FeatureVector> = (0..100)
        .map(|_| {
            let mut values = [0.0; N_FEATURES];
            values.iter_mut().for_each(|v| *v = r.random_range(-1.0..13.0));
            FeatureVector { values }
        })
        .collect();
    for a in Algorithm::ALL {
        let m = train(&x, &y, a, &hp(a), 5).unwrap();
        let path = dir.path().join(format!("{a}.model"));
        ensemble::save_model(&m, &path).unwrap();
        let back = ensemble::load_model(&path).unwrap();
        assert_eq!(back, m);
        for p in &probes {
            let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
            assert_eq!(bits(m.predict_proba(p).unwrap()), bits(back.predict_proba(p).unwrap()));
        }
    }
}

#[test]
fn damaged_model_files_are_rejected() {
    let (x, y) = one_informative(2, 10, 1);
    let m = train(&x, &y, Algorithm::GbtExact, &hp(Algorithm::GbtExact), 0).unwrap();
    let text = m.to_json();
    assert!(matches!(
        TrainedModel::from_json(&text[..text.len() / 2]),
        Err(Error::CorruptModel(_))
    ));
    let bumped = text.replace("\"format_version\":1", "\"format_version\":2");
    assert!(matches!(
        TrainedModel::from_json(&bumped),
        Err(Error::VersionMismatch { found: 2, expected: 1 })
    ));
    let bad_feature = text.replacen("\"feature\":", "\"feature\":99", 1);
    assert!(TrainedModel::from_json(&bad_feature).is_err());
    assert!(matches!(TrainedModel::from_json("{}"), Err(Error::CorruptModel(_))));
}

#[test]
fn training_is_deterministic_across_thread_pools() {
    let (x, y) = one_informative(5, 30, 31);
    for a in Algorithm::ALL {
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let m1 = serial.install(|| train(&x, &y, a, &hp(a), 9).unwrap());
        let m2 = wide.install(|| train(&x, &y, a, &hp(a), 9).unwrap());
        assert_eq!(m1.to_json(), m2.to_json(), "{a}");
        let m3 = train(&x, &y, a, &hp(a), 10).unwrap();
        if a == Algorithm::RandomForest {
            assert_ne!(m1.to_json(), m3.to_json());
        }
    }
}

#[test]
fn histogram_matches_exact_when_values_are_few() {
    // 40 distinct values per column, well under the bin budget
    let mut r = rng::stream(41, &[]);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..300 {
        let row: Vec<f64> = (0..4).map(|_| r.random_range(0..40) as f64 / 4.0).collect();
        let s = row[0] + 0.5 * row[1] - 0.3 * row[2] + r.random_range(-1.0..1.0);
        y.push(match s {
            s if s < 3.0 => Ecg,
            s if s < 6.0 => Eeg,
            s if s < 9.0 => BMov,
            _ => NonBio,
        });
        rows.push(row);
    }
    let x = FeatureMatrix::from_rows(names(4), &rows).unwrap();
    let exact = train(&x, &y, Algorithm::GbtExact, &hp(Algorithm::GbtExact), 0).unwrap();
    let hist = train(&x, &y, Algorithm::GbtHistogram, &hp(Algorithm::GbtHistogram), 0).unwrap();
    assert_eq!(exact.trees, hist.trees);
    assert_eq!(exact.predict_matrix(&x).unwrap(), hist.predict_matrix(&x).unwrap());
}

#[test]
fn boosting_trees_respect_depth() {
    let (x, y) = one_informative(3, 30, 3);
    let m = train(&x, &y, Algorithm::GbtExact, &hp(Algorithm::GbtExact), 0).unwrap();
    assert_eq!(m.trees.len(), 400);
    assert!(m.trees.iter().all(|t| t.depth() <= 3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn monotone_transform_keeps_predictions(seed in 0u64..1000, col in 0usize..3) {
        let (x, y) = one_informative(2, 25, seed);
        let warp = |m: &FeatureMatrix| {
            let rows: Vec<Vec<f64>> = m
                .rows()
                .map(|r| {
                    let mut r = r.to_vec();
                    r[col] = (r[col] * 0.7).exp() + r[col].powi(3);
                    r
                })
                .collect();
            FeatureMatrix::from_rows(m.names().to_vec(), &rows).unwrap()
        };
        for a in [Algorithm::RandomForest, Algorithm::GbtExact] {
            let mut h = hp(a);
            h.n_trees = 25;
            let m1 = train(&x, &y, a, &h, seed).unwrap();
            let m2 = train(&warp(&x), &y, a, &h, seed).unwrap();
            // probe at training points, which sit on the same side of every
            // order-statistic split in both models
            prop_assert_eq!(m1.predict_matrix(&x).unwrap(), m2.predict_matrix(&warp(&x)).unwrap());
        }
    }
}
