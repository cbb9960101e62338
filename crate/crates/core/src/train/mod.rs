//! Reference architectures, the training protocol, multi-seed aggregation
//! and checkpoints.

pub mod arch;
pub mod checkpoint;
pub mod config;
pub mod model;
pub mod run;

pub use arch::{Architecture, PoolPlan, Stack3d};
pub use checkpoint::Checkpoint;
pub use config::KeyValues;
pub use model::{Layer, LayerAudit, Model, RangeStats};
pub use run::{
    aggregate, evaluate, metrics_csv, run_experiment, train_one, AggregateRow, DivergenceRecord, Evaluation,
    Experiment, MetricsRow, Optimizer, SeedRun, Split, TrainConfig,
};
