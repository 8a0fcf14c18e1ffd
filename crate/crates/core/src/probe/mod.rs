// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-layer linear probes `z = w . x + b` trained with binary cross-entropy.

mod adam;
mod metrics;
mod model;
mod train;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use metrics::{auc_roc, evaluate, scores, EvalMetrics};
pub use model::{
    bce_with_logit, init_probe, layer_lr, layer_seed, loss_and_grad, probe_forward, sigmoid, Gradient, ProbeParams,
    Samples, INIT_WEIGHT_STD,
};
pub use train::{
    aggregate, metrics_rows, read_probes, select_rows, split, train_all_layers, train_all_layers_seeds, train_layers, train_probe,
    train_size, write_metrics_csv, write_probes, Aggregate, LayerResult, MetricSummary, MetricsRow, ProbeRun,
    RowSelection, SeedLayerSummary, Split, SplitSpec, TrainConfig, DEFAULT_SEEDS,
};
