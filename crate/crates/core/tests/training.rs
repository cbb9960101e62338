use proptest::prelude::*;
use qccnn::data::{normalize, synthesize, Dataset, SplitSpec, SynthKind};
use qccnn::qfilter::{Ansatz, Encoding};
use qccnn::train::run::{mean_std, parse_metrics_csv};
use qccnn::train::{
    aggregate, evaluate, metrics_csv, run_experiment, train_one, Architecture, MetricsRow, Model, PoolPlan, Split,
    Stack3d, TrainConfig,
};

fn stripes(n_train: usize, n_val: usize) -> (Dataset, Dataset) {
    let d = synthesize(SynthKind::Stripes, n_train + n_val, 11).unwrap();
    let (mut train, mut val) = SplitSpec::new(n_train, n_val).apply(&d).unwrap();
    normalize(&mut train, Some(&mut val)).unwrap();
    (train, val)
}

fn qccnn2d() -> Architecture {
    Architecture::Qccnn2d {
        encoding: Encoding::HigherOrder,
        ansatz: Ansatz::basic(1),
    }
}

#[test]
fn audited_parameter_counts() {
    let count = |arch, shape: &[usize], classes| Model::build(arch, shape, classes, 0).unwrap().param_count();
    assert_eq!(count(Architecture::Classical2d, &[1, 28, 28], 11), 20 + 8635);
    assert_eq!(count(qccnn2d(), &[1, 28, 28], 11), 4 + 8635);
    let stack = Stack3d::default();
    let classical = count(Architecture::Classical3d { stack }, &[1, 16, 16, 16], 2);
    let quantum = count(Architecture::Qccnn3d { layers: 2, stack }, &[1, 16, 16, 16], 2);
    // Fourth layer: grouped conv 8·(8+1)·8 = 576 against 8 filters of 2·3·8 = 384.
    assert_eq!(classical - quantum, 576 - 384);
}

#[test]
fn impossible_pool_plan_is_a_config_error() {
    let stack = Stack3d {
        pools: PoolPlan::All,
        fourth_stride: 1,
    };
    let err = Model::build(Architecture::Classical3d { stack }, &[1, 16, 16, 16], 2, 0).unwrap_err();
    assert!(matches!(err, qccnn::Error::Config(_)), "{err}");
}

#[test]
fn runs_are_deterministic_across_worker_counts() {
    let (train, val) = stripes(24, 8);
    let mut cfg = TrainConfig::new(Architecture::Classical2d, 8);
    cfg.epochs = 2;
    cfg.seeds = vec![0, 1, 2];
    let one = run_experiment(&cfg, &train, &val).unwrap();
    cfg.workers = 3;
    let three = run_experiment(&cfg, &train, &val).unwrap();
    assert_eq!(metrics_csv(&one.rows()), metrics_csv(&three.rows()));
    assert_eq!(one.rows().len(), 3 * 2 * 2);
    for (a, b) in one.runs.iter().zip(&three.runs) {
        assert_eq!(a.model.params(), b.model.params());
    }
    let other = train_one(&cfg, &train, &val, 7).unwrap();
    assert_ne!(other.rows, one.runs[0].rows);
}

#[test]
fn quantum_run_is_deterministic_and_in_range() {
    let (train, val) = stripes(6, 2);
    let mut cfg = TrainConfig::new(qccnn2d(), 4);
    cfg.epochs = 1;
    cfg.range_check = true;
    let a = train_one(&cfg, &train, &val, 3).unwrap();
    let b = train_one(&cfg, &train, &val, 3).unwrap();
    assert_eq!(a.rows, b.rows);
    assert!(a.range.checked > 0);
    assert_eq!(a.range.out_of_range, 0);
}

#[test]
fn last_row_matches_fresh_evaluation() {
    let (train, val) = stripes(16, 8);
    let mut cfg = TrainConfig::new(Architecture::Classical2d, 5);
    cfg.epochs = 2;
    let mut run = train_one(&cfg, &train, &val, 0).unwrap();
    let last = run.rows.iter().rev().find(|r| r.split == Split::Val).copied().unwrap();
    for batch in [1, 3, 8, 100] {
        let e = evaluate(&mut run.model, &val, batch).unwrap();
        assert_eq!((e.loss, e.accuracy), (last.loss, last.accuracy), "batch {batch}");
    }
}

#[test]
fn singleton_batches_fold_under_batch_norm() {
    let d = synthesize(SynthKind::Blob, 9, 2).unwrap();
    let (mut train, mut val) = SplitSpec::new(5, 4).apply(&d).unwrap();
    normalize(&mut train, Some(&mut val)).unwrap();
    let stack = Stack3d::default();
    let mut cfg = TrainConfig::new(Architecture::Classical3d { stack }, 4);
    cfg.epochs = 1;
    let run = train_one(&cfg, &train, &val, 0).unwrap();
    assert_eq!(run.epochs_completed, 1);
    assert!(run.model.is_finite());
}

#[test]
fn divergence_keeps_last_good_state() {
    let (train, val) = stripes(16, 4);
    let mut cfg = TrainConfig::new(Architecture::Classical2d, 4);
    cfg.epochs = 3;
    cfg.lr = 1e200;
    let run = train_one(&cfg, &train, &val, 0).unwrap();
    let div = run.divergence.expect("a huge step overflows");
    assert_eq!(run.epochs_completed, div.epoch - 1);
    assert_eq!(run.rows.len(), 2 * run.epochs_completed);
    assert!(run.model.is_finite());
}

#[test]
fn csv_round_trip_and_aggregate() {
    let (train, val) = stripes(16, 8);
    let mut cfg = TrainConfig::new(Architecture::Classical2d, 8);
    cfg.epochs = 2;
    cfg.seeds = vec![4, 9];
    let exp = run_experiment(&cfg, &train, &val).unwrap();
    let text = metrics_csv(&exp.rows());
    assert!(text.starts_with("seed,epoch,split,loss,accuracy\n"));
    assert_eq!(parse_metrics_csv(&text).unwrap(), exp.rows());
    assert_eq!(aggregate(&exp.rows()), exp.aggregate);
    for a in &exp.aggregate {
        let vals: Vec<f64> = exp
            .rows()
            .iter()
            .filter(|r| r.epoch == a.epoch && r.split == a.split)
            .map(|r| if a.metric.name() == "loss" { r.loss } else { r.accuracy })
            .collect();
        assert_eq!(vals.len(), 2);
        let mean = (vals[0] + vals[1]) / 2.0;
        assert!((a.mean - mean).abs() <= 1e-15);
        assert!((a.std - (vals[0] - vals[1]).abs() / 2.0).abs() <= 1e-15);
    }
}

fn rows() -> impl Strategy<Value = Vec<MetricsRow>> {
    prop::collection::vec((0.0f64..5.0, 0.0f64..=1.0), 1..8).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(s, (loss, accuracy))| MetricsRow {
                seed: s as u64,
                epoch: 1,
                split: Split::Val,
                loss,
                accuracy,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn aggregation_ignores_seed_order(rs in rows(), rot in 0usize..8) {
        let mut shuffled = rs.clone();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        prop_assert_eq!(aggregate(&rs), aggregate(&shuffled));
    }

    #[test]
    fn mean_std_bounds(v in prop::collection::vec(-10.0f64..10.0, 1..20)) {
        let (m, s) = mean_std(&v);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
        prop_assert!(s >= 0.0 && s <= (hi - lo) / 2.0 + 1e-12);
    }
}
