use ndarray::{Array2, Axis};
use rand::Rng;
use slthresh::data::{make_folds, FoldPlan};
use slthresh::learners::{self, LearnerKind, LearnerSpec};
use slthresh::stacking::cv_predictions;
use slthresh::{seed, Dataset};

fn noisy(n: usize, s: u64) -> Dataset {
    let mut rng = seed::rng(s);
    let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-2.0..2.0));
    let y = x
        .rows()
        .into_iter()
        .map(|r| u8::from(r[0] - 0.5 * r[2] + rng.random_range(-1.0..1.0) > 0.0))
        .collect();
    Dataset::from_features(x, y).unwrap()
}

fn deterministic_library() -> Vec<LearnerSpec> {
    vec![
        LearnerSpec::new(LearnerKind::Knn, 0).with("k", 5.0).unwrap(),
        LearnerSpec::new(LearnerKind::Logistic, 0),
        LearnerSpec::new(LearnerKind::Cart, 0),
    ]
}

#[test]
fn poison_row_only_reaches_other_folds() {
    let base = noisy(120, 1);
    let mut x = base.features().to_owned();
    x.push_row(ndarray::ArrayView1::from(&[0.1, 0.2, -0.3])).unwrap();
    let mut assignments = make_folds(120, 5, base.labels(), 3).unwrap().assignments().to_vec();
    assignments.push(2);
    let plan = FoldPlan::from_assignments(assignments, 5).unwrap();

    let with_label = |label: u8| {
        let mut y = base.labels().to_vec();
        y.push(label);
        Dataset::from_features(x.clone(), y).unwrap()
    };
    let lib = deterministic_library();
    let z0 = cv_predictions(&lib, &with_label(0), &plan).unwrap();
    let z1 = cv_predictions(&lib, &with_label(1), &plan).unwrap();
    // the poison row's label enters every training set except its own fold's
    for i in plan.validation(2) {
        assert_eq!(z0.values().row(i), z1.values().row(i), "row {i}");
    }
    assert_ne!(z0.values(), z1.values());
}

#[test]
fn columns_are_stitched_per_fold_predictions() {
    let d = noisy(90, 2);
    let plan = make_folds(90, 4, d.labels(), 5).unwrap();
    let lib = deterministic_library();
    let z = cv_predictions(&lib, &d, &plan).unwrap();
    for (k, spec) in lib.iter().enumerate() {
        let mut stitched = vec![f64::NAN; 90];
        for f in 0..4 {
            let train = d.subset(&plan.training(f)).unwrap();
            let valid = plan.validation(f);
            let model = learners::fit(spec, &train).unwrap();
            let pred = learners::predict(&model, d.features().select(Axis(0), &valid).view()).unwrap();
            for (i, p) in valid.into_iter().zip(pred) {
                stitched[i] = p;
            }
        }
        assert_eq!(z.column(k), stitched);
    }
}

#[test]
fn leave_one_out_nearest_neighbour_sees_the_duplicate() {
    // every point appears twice; the nearest *other* point is its twin
    let mut rng = seed::rng(4);
    let pts: Vec<(f64, u8)> = (0..15).map(|i| (rng.random_range(-5.0..5.0), u8::from(i % 3 == 0))).collect();
    let x = Array2::from_shape_fn((30, 1), |(i, _)| pts[i / 2].0);
    let y: Vec<u8> = (0..30).map(|i| pts[i / 2].1).collect();
    let d = Dataset::from_features(x, y.clone()).unwrap();
    let plan = make_folds(30, 30, &y, 0).unwrap();
    let lib = [LearnerSpec::new(LearnerKind::Knn, 0).with("k", 1.0).unwrap()];
    let z = cv_predictions(&lib, &d, &plan).unwrap();
    assert_eq!(z.column(0), y.iter().map(|&v| f64::from(v)).collect::<Vec<_>>());
}

#[test]
fn identical_for_any_worker_count() {
    let d = noisy(150, 6);
    let plan = make_folds(150, 5, d.labels(), 1).unwrap();
    let lib = vec![
        LearnerSpec::new(LearnerKind::RandomForest, 11).with("trees", 30.0).unwrap(),
        LearnerSpec::new(LearnerKind::BaggedTrees, 12).with("trees", 10.0).unwrap(),
        LearnerSpec::new(LearnerKind::BoostedStumps, 13),
        LearnerSpec::new(LearnerKind::Knn, 14),
    ];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| cv_predictions(&lib, &d, &plan).unwrap())
    };
    let one = run(1);
    assert_eq!(one.values(), run(4).values());
    assert_eq!(one.values(), run(1).values());
}
