use std::fmt::Write as _;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::Architecture;
use super::model::{Model, RangeStats};
use crate::data::{shuffled_indices, Dataset};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::nn::{adam_step, cross_entropy_per_item, predictions, softmax_cross_entropy, Adam, AdamState};

pub const DEFAULT_EPOCHS: usize = 20;
pub const DEFAULT_LR: f64 = 0.001;
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

// Independent generator streams derived from a run seed.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_DROPOUT: u64 = 2;

pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub arch: Architecture,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seeds: Vec<u64>,
    pub workers: usize,
    /// Track quantum activations against [−1, 1] on every forward pass.
    pub range_check: bool,
}

impl TrainConfig {
    pub fn new(arch: Architecture, batch: usize) -> Self {
        Self {
            arch,
            epochs: DEFAULT_EPOCHS,
            batch,
            lr: DEFAULT_LR,
            seeds: DEFAULT_SEEDS.to_vec(),
            workers: 1,
            range_check: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::usage("epochs must be at least 1"));
        }
        if self.batch == 0 {
            return Err(Error::usage("batch size must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::usage("need at least one seed"));
        }
        if self.workers == 0 {
            return Err(Error::usage("workers must be at least 1"));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::usage(format!(
                "learning rate {} must be finite and ≥ 0",
                self.lr
            )));
        }
        Ok(())
    }

    /// Default batch size per input kind: 8 for 2D, 16 for 3D.
    pub fn default_batch(arch: &Architecture) -> usize {
        if arch.spatial_dims() == 2 {
            8
        } else {
            16
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            other => Err(Error::format(0, format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DivergenceRecord {
    pub seed: u64,
    pub epoch: usize,
    /// Zero-based batch index within the epoch; `None` when the evaluation
    /// pass produced the non-finite loss.
    pub batch: Option<usize>,
}

/// Adam state for every parameter block of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    pub config: Adam<f64>,
    pub states: Vec<AdamState<f64>>,
}

impl Optimizer {
    pub fn new(model: &Model, lr: f64) -> Self {
        Self {
            config: Adam::new(lr),
            states: model.params().iter().map(|p| AdamState::new(p.len())).collect(),
        }
    }

    pub fn step(&mut self, model: &mut Model, grads: &[Vec<f64>]) -> Result<()> {
        let mut params = model.params_mut();
        if params.len() != grads.len() || params.len() != self.states.len() {
            return Err(Error::usage("gradient blocks do not match the model"));
        }
        for ((p, g), s) in params.iter_mut().zip(grads).zip(&mut self.states) {
            adam_step(p, g, s, &self.config)?;
        }
        Ok(())
    }
}

/// Mean loss and accuracy in evaluation mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

pub fn evaluate(model: &mut Model, data: &Dataset, batch: usize) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::usage("cannot evaluate an empty split"));
    }
    if data.item_shape() != model.input_shape.as_slice() {
        return Err(Error::config(format!(
            "dataset items {:?} do not match model input {:?}",
            data.item_shape(),
            model.input_shape
        )));
    }
    if data.n_classes() > model.n_classes {
        return Err(Error::config(format!(
            "dataset has {} classes, model {}",
            data.n_classes(),
            model.n_classes
        )));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for chunk in idx.chunks(batch.max(1)) {
        let (x, y) = data.batch(chunk);
        let logits = model.forward_eval(&x)?;
        // Item by item, so the result does not depend on the batch size.
        for l in cross_entropy_per_item(&logits, &y)? {
            loss_sum += l;
        }
        correct += predictions(&logits).iter().zip(&y).filter(|(p, l)| p == l).count();
    }
    Ok(Evaluation {
        loss: loss_sum / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
    })
}

/// Everything one seed's training run produced.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    /// The model after the last completed epoch (the last good one if
    /// training diverged).
    pub model: Model,
    pub optimizer: Optimizer,
    pub epochs_completed: usize,
    pub divergence: Option<DivergenceRecord>,
    pub range: RangeStats,
}

/// Batches of one epoch. A trailing single item is folded into the previous
/// batch when batch statistics need more than one value.
fn epoch_batches(order: &[usize], batch: usize, fold_singleton: bool) -> Vec<&[usize]> {
    let mut batches: Vec<&[usize]> = order.chunks(batch).collect();
    if fold_singleton && batches.len() > 1 && batches.last().map(|b| b.len()) == Some(1) {
        batches.pop();
        let start = order.len() - batches.last().expect("non-empty").len() - 1;
        *batches.last_mut().expect("non-empty") = &order[start..];
    }
    batches
}

/// Trains one freshly built model on `train`, evaluating on `train` and
/// `val` (when non-empty) after every epoch.
pub fn train_one(cfg: &TrainConfig, train: &Dataset, val: &Dataset, seed: u64) -> Result<SeedRun> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::usage("training split is empty"));
    }
    let mut init_rng = seeded_stream(seed, STREAM_INIT);
    let mut model = Model::build_uninit(cfg.arch, train.item_shape(), train.n_classes().max(2))?;
    model.init(&mut init_rng);
    model.range_check = cfg.range_check;
    let optimizer = Optimizer::new(&model, cfg.lr);
    train_from(cfg, train, val, seed, model, optimizer)
}

/// Continues training `model` with `optimizer` for `cfg.epochs` epochs.
pub fn train_from(
    cfg: &TrainConfig,
    train: &Dataset,
    val: &Dataset,
    seed: u64,
    mut model: Model,
    mut optimizer: Optimizer,
) -> Result<SeedRun> {
    let mut shuffle_rng = seeded_stream(seed, STREAM_SHUFFLE);
    let mut dropout_rng = seeded_stream(seed, STREAM_DROPOUT);
    let fold = model.has_batch_norm();
    let mut rows = Vec::with_capacity(2 * cfg.epochs);
    let mut divergence = None;
    let mut completed = 0;

    'epochs: for epoch in 1..=cfg.epochs {
        let snapshot = (model.clone(), optimizer.clone());
        let order = shuffled_indices(train.len(), &mut shuffle_rng);
        for (b, chunk) in epoch_batches(&order, cfg.batch, fold).into_iter().enumerate() {
            let (x, y) = train.batch(chunk);
            let (logits, caches) = model.forward_train(&x, &mut dropout_rng)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &y)?;
            let grads = if loss.is_finite() {
                Some(model.backward(&caches, &grad)?)
            } else {
                None
            };
            let finite = grads
                .as_ref()
                .is_some_and(|g| g.iter().all(|blk| blk.iter().all(|v| v.is_finite())));
            if finite {
                optimizer.step(&mut model, grads.as_deref().expect("checked"))?;
            }
            if !finite || !model.is_finite() {
                log::warn!("seed {seed}: non-finite values in epoch {epoch}, batch {b}; restoring epoch start");
                divergence = Some(DivergenceRecord {
                    seed,
                    epoch,
                    batch: Some(b),
                });
                let range = model.range;
                (model, optimizer) = snapshot;
                model.range = range;
                break 'epochs;
            }
        }
        let mut epoch_rows = Vec::with_capacity(2);
        for (split, data) in [(Split::Train, train), (Split::Val, val)] {
            if data.is_empty() {
                continue;
            }
            let e = evaluate(&mut model, data, cfg.batch)?;
            epoch_rows.push(MetricsRow {
                seed,
                epoch,
                split,
                loss: e.loss,
                accuracy: e.accuracy,
            });
        }
        if epoch_rows.iter().any(|r| !r.loss.is_finite()) {
            log::warn!("seed {seed}: non-finite evaluation loss after epoch {epoch}; restoring epoch start");
            divergence = Some(DivergenceRecord {
                seed,
                epoch,
                batch: None,
            });
            let range = model.range;
            (model, optimizer) = snapshot;
            model.range = range;
            break;
        }
        for r in &epoch_rows {
            log::info!(
                "seed {seed} epoch {epoch} {}: loss {:.6} accuracy {:.4}",
                r.split.name(),
                r.loss,
                r.accuracy
            );
        }
        rows.extend(epoch_rows);
        completed = epoch;
    }
    Ok(SeedRun {
        seed,
        rows,
        range: model.range,
        model,
        optimizer,
        epochs_completed: completed,
        divergence,
    })
}

pub const METRICS_HEADER: &str = "seed,epoch,split,loss,accuracy";
pub const AGGREGATE_HEADER: &str = "epoch,split,metric,mean,std";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.seed,
            r.epoch,
            r.split.name(),
            r.loss,
            r.accuracy
        );
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::format(
            0,
            format!("metrics CSV must start with {METRICS_HEADER:?}"),
        ));
    }
    let mut offset = METRICS_HEADER.len() as u64 + 1;
    let mut rows = Vec::new();
    for line in lines {
        let bad = || Error::format(offset, format!("malformed metrics row {line:?}"));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        rows.push(MetricsRow {
            seed: f[0].parse().map_err(|_| bad())?,
            epoch: f[1].parse().map_err(|_| bad())?,
            split: f[2].parse().map_err(|_| bad())?,
            loss: f[3].parse().map_err(|_| bad())?,
            accuracy: f[4].parse().map_err(|_| bad())?,
        });
        offset += line.len() as u64 + 1;
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Loss,
    Accuracy,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Loss => "loss",
            Metric::Accuracy => "accuracy",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateRow {
    pub epoch: usize,
    pub split: Split,
    pub metric: Metric,
    pub mean: f64,
    /// Population standard deviation across seeds.
    pub std: f64,
    pub seeds: usize,
}

/// Mean and population standard deviation of `values`, summed in ascending
/// order so the result does not depend on the order of the seeds.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, (dev.iter().sum::<f64>() / n).sqrt())
}

/// Per (epoch, split, metric) statistics over every seed that reached that epoch.
pub fn aggregate(rows: &[MetricsRow]) -> Vec<AggregateRow> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(usize, Split, Metric), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.epoch, r.split, Metric::Loss)).or_default().push(r.loss);
        groups
            .entry((r.epoch, r.split, Metric::Accuracy))
            .or_default()
            .push(r.accuracy);
    }
    groups
        .into_iter()
        .map(|((epoch, split, metric), values)| {
            let (mean, std) = mean_std(&values);
            AggregateRow {
                epoch,
                split,
                metric,
                mean,
                std,
                seeds: values.len(),
            }
        })
        .collect()
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch,
            r.split.name(),
            r.metric.name(),
            r.mean,
            r.std
        );
    }
    out
}

/// Result of training every seed in a config.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub runs: Vec<SeedRun>,
    pub aggregate: Vec<AggregateRow>,
}

impl Experiment {
    pub fn rows(&self) -> Vec<MetricsRow> {
        self.runs.iter().flat_map(|r| r.rows.iter().copied()).collect()
    }

    pub fn divergences(&self) -> Vec<DivergenceRecord> {
        self.runs.iter().filter_map(|r| r.divergence).collect()
    }

    /// Writes `metrics_seed<s>.csv` per seed, `metrics.csv` and `aggregate.csv`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        for run in &self.runs {
            write_atomic(
                &dir.join(format!("metrics_seed{}.csv", run.seed)),
                metrics_csv(&run.rows).as_bytes(),
            )?;
        }
        write_atomic(&dir.join("metrics.csv"), metrics_csv(&self.rows()).as_bytes())?;
        write_atomic(&dir.join("aggregate.csv"), aggregate_csv(&self.aggregate).as_bytes())?;
        Ok(())
    }
}

/// Trains each seed in turn inside a pool of `cfg.workers` threads.
pub fn run_experiment(cfg: &TrainConfig, train: &Dataset, val: &Dataset) -> Result<Experiment> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let runs = pool.install(|| {
        cfg.seeds
            .iter()
            .map(|&seed| train_one(cfg, train, val, seed))
            .collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<MetricsRow> = runs.iter().flat_map(|r| r.rows.iter().copied()).collect();
    Ok(Experiment {
        aggregate: aggregate(&rows),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_2d;
    use crate::qfilter::{Ansatz, Encoding};

    fn row(seed: u64, epoch: usize, split: Split, loss: f64, accuracy: f64) -> MetricsRow {
        MetricsRow {
            seed,
            epoch,
            split,
            loss,
            accuracy,
        }
    }

    #[test]
    fn single_seed_has_zero_std() {
        let agg = aggregate(&[row(3, 1, Split::Train, 0.7, 0.5)]);
        assert_eq!(agg.len(), 2);
        assert!(agg.iter().all(|a| a.std == 0.0 && a.seeds == 1));
    }

    #[test]
    fn two_seed_hand_values() {
        let rows = [row(0, 1, Split::Val, 1.0, 0.25), row(1, 1, Split::Val, 3.0, 0.75)];
        let agg = aggregate(&rows);
        let loss = agg.iter().find(|a| a.metric == Metric::Loss).unwrap();
        assert_eq!((loss.mean, loss.std), (2.0, 1.0));
        let acc = agg.iter().find(|a| a.metric == Metric::Accuracy).unwrap();
        assert_eq!((acc.mean, acc.std), (0.5, 0.25));
    }

    #[test]
    fn seed_order_does_not_matter() {
        let rows: Vec<MetricsRow> = (0..5)
            .map(|s| row(s, 1, Split::Train, 0.1 + 0.3 * (s as f64).sin(), 0.1 * s as f64 + 0.01))
            .collect();
        let mut rev = rows.clone();
        rev.reverse();
        assert_eq!(aggregate_csv(&aggregate(&rows)), aggregate_csv(&aggregate(&rev)));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            row(1, 1, Split::Train, 0.1 + 0.2, 1.0 / 3.0),
            row(1, 1, Split::Val, 2.5e-17, 0.0),
        ];
        assert_eq!(parse_metrics_csv(&metrics_csv(&rows)).unwrap(), rows);
        assert!(parse_metrics_csv("seed,epoch\n").is_err());
        assert!(parse_metrics_csv(&format!("{METRICS_HEADER}\n1,2,test,0,0\n")).is_err());
    }

    #[test]
    fn trailing_singleton_folding() {
        let order: Vec<usize> = (0..9).collect();
        let b = epoch_batches(&order, 4, true);
        assert_eq!(b.iter().map(|c| c.len()).collect::<Vec<_>>(), vec![4, 5]);
        let b = epoch_batches(&order, 4, false);
        assert_eq!(b.iter().map(|c| c.len()).collect::<Vec<_>>(), vec![4, 4, 1]);
        let b = epoch_batches(&order[..1], 4, true);
        assert_eq!(b.len(), 1);
    }

    fn small_data() -> (Dataset, Dataset) {
        let mut all = synth_2d(24, 3).unwrap();
        crate::data::NormStats::fit(&all).unwrap().apply(&mut all);
        crate::data::SplitSpec::new(16, 8).apply(&all).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let (train, val) = small_data();
        let mut cfg = TrainConfig::new(Architecture::Classical2d, 4);
        cfg.epochs = 2;
        cfg.lr = 0.0;
        let run = train_one(&cfg, &train, &val, 5).unwrap();
        let fresh = Model::build_uninit(cfg.arch, &[1, 28, 28], 2).map(|mut m| {
            m.init(&mut seeded_stream(5, STREAM_INIT));
            m
        });
        assert_eq!(run.model.params(), fresh.unwrap().params());
        assert_eq!(run.rows.len(), 4);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let (train, val) = small_data();
        let mut cfg = TrainConfig::new(
            Architecture::Qccnn2d {
                encoding: Encoding::HigherOrder,
                ansatz: Ansatz::basic(1),
            },
            4,
        );
        cfg.epochs = 2;
        cfg.seeds = vec![1, 2];
        let a = run_experiment(&cfg, &train, &val).unwrap();
        let b = run_experiment(&cfg, &train, &val).unwrap();
        assert_eq!(metrics_csv(&a.rows()), metrics_csv(&b.rows()));
        assert_eq!(aggregate_csv(&a.aggregate), aggregate_csv(&b.aggregate));
    }

    #[test]
    fn overfits_a_single_item() {
        let (train, _) = small_data();
        let one = train.subset(&[0]);
        let mut cfg = TrainConfig::new(Architecture::Classical2d, 1);
        cfg.epochs = 5;
        let run = train_one(&cfg, &one, &one.subset(&[]), 0).unwrap();
        let losses: Vec<f64> = run.rows.iter().map(|r| r.loss).collect();
        assert_eq!(losses.len(), 5);
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    }

    #[test]
    fn evaluate_rejects_empty_and_mismatched() {
        let (train, _) = small_data();
        let mut m = Model::build(Architecture::Classical2d, &[1, 28, 28], 2, 0).unwrap();
        assert!(matches!(evaluate(&mut m, &train.subset(&[]), 4), Err(Error::Usage(_))));
        let mut other = Model::build(Architecture::Classical2d, &[1, 8, 8], 2, 0).unwrap();
        assert!(matches!(evaluate(&mut other, &train, 4), Err(Error::Config(_))));
    }
}
