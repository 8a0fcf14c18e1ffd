// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::metrics::{evaluate, EvalMetrics};
use super::model::{init_probe, layer_lr, layer_seed, loss_and_grad_rows, ProbeParams, Samples};
use crate::error::{Error, Result};
use crate::labeling::LabeledDataset;
use crate::store::{LayerMatrix, LayerSource};

pub const DEFAULT_SEEDS: [u64; 3] = [73, 5, 120];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub base_lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub base_seed: u64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 3, base_lr: 1e-4, weight_decay: 1e-5, batch_size: 64, base_seed: 73, threshold: 0.5 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.base_lr > 0.0) {
            return Err(Error::config("base_lr must be positive"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(self.weight_decay >= 0.0) || !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("weight_decay must be >= 0 and threshold in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub split_seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.7, split_seed: 73 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Number of training rows out of `n`: `floor(fraction * n)`.
pub fn train_size(n: usize, fraction: f64) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Shuffles the non-excluded samples with `split_seed` and cuts the first
/// `floor(train_fraction * n)` into the training set.
pub fn split(labeled: &LabeledDataset, spec: &SplitSpec) -> Result<Split> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::config(format!("train fraction {} outside (0, 1)", spec.train_fraction)));
    }
    let mut ids: Vec<String> =
        labeled.labels.iter().filter(|s| s.label.target().is_some()).map(|s| s.sample_id.clone()).collect();
    if ids.len() < 2 {
        return Err(Error::input(format!("{} labeled samples are too few to split", ids.len())));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.split_seed));
    let n_train = train_size(ids.len(), spec.train_fraction);
    if n_train == 0 || n_train == ids.len() {
        return Err(Error::input(format!("split of {} samples leaves one side empty", ids.len())));
    }
    let test = ids.split_off(n_train);
    Ok(Split { train: ids, test })
}

/// Trains one probe: seeded init, `epochs` passes over shuffled minibatches,
/// Adam with the layer's learning rate. Returns the final parameters and the
/// training-set metrics after each epoch.
pub fn train_probe(
    data: &Samples,
    cfg: &TrainConfig,
    layer: usize,
    n_layers: usize,
) -> Result<(ProbeParams, Vec<EvalMetrics>)> {
    cfg.validate()?;
    let pos = data.positives();
    if pos == 0 || pos == data.len() {
        return Err(Error::DegenerateData(format!(
            "layer {layer}: training data holds a single class ({pos} known of {})",
            data.len()
        )));
    }
    let mut params = init_probe(layer, data.d, cfg.base_seed);
    let lr = layer_lr(cfg.base_lr, layer, n_layers);
    let mut rng = ChaCha8Rng::seed_from_u64(layer_seed(cfg.base_seed, layer));
    rng.set_stream(1);
    let mut state = AdamState::new(data.d + 1);
    let mut theta = vec![0.0; data.d + 1];
    let mut grads = vec![0.0; data.d + 1];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let g = loss_and_grad_rows(&params, data, batch, cfg.weight_decay)?;
            theta[..data.d].copy_from_slice(&params.w);
            theta[data.d] = params.b;
            grads[..data.d].copy_from_slice(&g.w);
            grads[data.d] = g.b;
            adam_step(&mut theta, &grads, &mut state, lr)?;
            params.w.copy_from_slice(&theta[..data.d]);
            params.b = theta[data.d];
        }
        history.push(evaluate(&params, data, cfg.threshold)?);
    }
    if params.w.iter().any(|v| !v.is_finite()) || !params.b.is_finite() {
        return Err(Error::DegenerateData(format!("layer {layer}: training diverged")));
    }
    Ok((params, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerResult {
    #[serde(flatten)]
    pub params: ProbeParams,
    pub seed: u64,
    pub lr: f64,
    pub train: EvalMetrics,
    pub test: EvalMetrics,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub loss: f64,
    pub auc: Option<f64>,
    pub accuracy: f64,
    pub random_baseline: f64,
    pub delta: f64,
}

/// Mean and sample standard deviation of each metric over a set of rows.
/// The deviation is 0 for fewer than two rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: MetricSummary,
    pub std: MetricSummary,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate(metrics: &[EvalMetrics]) -> Aggregate {
    if metrics.is_empty() {
        return Aggregate::default();
    }
    let col = |f: fn(&EvalMetrics) -> f64| mean_std(&metrics.iter().map(f).collect::<Vec<_>>());
    let aucs: Vec<f64> = metrics.iter().filter_map(|m| m.auc).collect();
    let auc = (!aucs.is_empty()).then(|| mean_std(&aucs));
    let (loss, accuracy, baseline, delta) =
        (col(|m| m.loss), col(|m| m.accuracy), col(|m| m.random_baseline), col(|m| m.delta));
    Aggregate {
        mean: MetricSummary {
            loss: loss.0,
            auc: auc.map(|a| a.0),
            accuracy: accuracy.0,
            random_baseline: baseline.0,
            delta: delta.0,
        },
        std: MetricSummary {
            loss: loss.1,
            auc: auc.map(|a| a.1),
            accuracy: accuracy.1,
            random_baseline: baseline.1,
            delta: delta.1,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRun {
    pub config: TrainConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub layers: Vec<LayerResult>,
    /// Across layers.
    pub train_aggregate: Aggregate,
    pub test_aggregate: Aggregate,
}

impl ProbeRun {
    /// Layer with the highest test delta; the lowest index wins ties.
    pub fn best_layer(&self) -> &LayerResult {
        self.layers
            .iter()
            .reduce(|best, r| if r.test.delta > best.test.delta { r } else { best })
            .expect("a run has at least one layer")
    }
}

/// Row positions and targets of a split inside a dump.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSelection {
    pub rows: Vec<usize>,
    pub targets: Vec<u8>,
}

impl RowSelection {
    pub fn samples(&self, matrix: &LayerMatrix) -> Result<Samples> {
        Samples::from_rows(matrix.d_model, self.rows.iter().zip(&self.targets).map(|(&r, &t)| (matrix.row(r), t)))
    }
}

/// Resolves sample ids to dump rows and probe targets.
pub fn select_rows(source: &dyn LayerSource, labels: &LabeledDataset, ids: &[String]) -> Result<RowSelection> {
    let row_of: HashMap<&str, usize> =
        source.records().iter().enumerate().map(|(i, r)| (r.sample_id.as_str(), i)).collect();
    let target_of: HashMap<&str, Option<u8>> =
        labels.labels.iter().map(|s| (s.sample_id.as_str(), s.label.target())).collect();
    let mut sel = RowSelection { rows: Vec::with_capacity(ids.len()), targets: Vec::with_capacity(ids.len()) };
    for id in ids {
        let row = *row_of.get(id.as_str()).ok_or_else(|| Error::consistency(format!("{id} is not in the dump")))?;
        let target = target_of
            .get(id.as_str())
            .ok_or_else(|| Error::consistency(format!("{id} has no label")))?
            .ok_or_else(|| Error::consistency(format!("{id} is excluded and cannot be used")))?;
        sel.rows.push(row);
        sel.targets.push(target);
    }
    Ok(sel)
}

/// Trains an independent probe for every layer of the dump.
pub fn train_all_layers(
    source: &dyn LayerSource,
    labels: &LabeledDataset,
    split: &Split,
    cfg: &TrainConfig,
) -> Result<ProbeRun> {
    let layers: Vec<usize> = (0..source.header().n_layers).collect();
    train_layers(source, labels, split, cfg, &layers)
}

/// Like [`train_all_layers`] for a chosen set of layers. Learning rates still
/// scale with the dump's full layer count.
pub fn train_layers(
    source: &dyn LayerSource,
    labels: &LabeledDataset,
    split: &Split,
    cfg: &TrainConfig,
    layers: &[usize],
) -> Result<ProbeRun> {
    cfg.validate()?;
    let n_layers = source.header().n_layers;
    if layers.is_empty() {
        return Err(Error::input("no layers selected"));
    }
    if let Some(l) = layers.iter().find(|&&l| l >= n_layers) {
        return Err(Error::input(format!("layer {l} outside 0..{n_layers}")));
    }
    let train = select_rows(source, labels, &split.train)?;
    let test = select_rows(source, labels, &split.test)?;
    if test.rows.is_empty() {
        return Err(Error::input("test split is empty"));
    }
    let layers = layers
        .par_iter()
        .map(|&l| {
            let matrix = source.layer(l)?;
            let train_data = train.samples(&matrix)?;
            let test_data = test.samples(&matrix)?;
            let (params, history) = train_probe(&train_data, cfg, l, n_layers)?;
            let test_metrics = evaluate(&params, &test_data, cfg.threshold)?;
            Ok(LayerResult {
                train: *history.last().expect("epochs >= 1"),
                test: test_metrics,
                seed: layer_seed(cfg.base_seed, l),
                lr: layer_lr(cfg.base_lr, l, n_layers),
                params,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let train_aggregate = aggregate(&layers.iter().map(|r| r.train).collect::<Vec<_>>());
    let test_aggregate = aggregate(&layers.iter().map(|r| r.test).collect::<Vec<_>>());
    Ok(ProbeRun { config: *cfg, n_train: train.rows.len(), n_test: test.rows.len(), layers, train_aggregate, test_aggregate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedLayerSummary {
    pub layer: usize,
    pub train: Aggregate,
    pub test: Aggregate,
}

/// Runs [`train_all_layers`] once per base seed and aggregates each layer
/// across seeds.
pub fn train_all_layers_seeds(
    source: &dyn LayerSource,
    labels: &LabeledDataset,
    split: &Split,
    cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<(Vec<ProbeRun>, Vec<SeedLayerSummary>)> {
    if seeds.is_empty() {
        return Err(Error::config("at least one seed is required"));
    }
    let runs = seeds
        .iter()
        .map(|&s| train_all_layers(source, labels, split, &TrainConfig { base_seed: s, ..*cfg }))
        .collect::<Result<Vec<_>>>()?;
    let summary = (0..source.header().n_layers)
        .map(|l| SeedLayerSummary {
            layer: l,
            train: aggregate(&runs.iter().map(|r| r.layers[l].train).collect::<Vec<_>>()),
            test: aggregate(&runs.iter().map(|r| r.layers[l].test).collect::<Vec<_>>()),
        })
        .collect();
    Ok((runs, summary))
}

pub fn write_probes(path: &Path, run: &ProbeRun) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(run)?)?;
    Ok(())
}

pub fn read_probes(path: &Path) -> Result<ProbeRun> {
    let run: ProbeRun = serde_json::from_slice(&std::fs::read(path)?)?;
    if run.layers.is_empty() {
        return Err(Error::input(format!("{} holds no probes", path.display())));
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// Layer index, or `mean` / `std` for the aggregate rows.
    pub layer: String,
    pub subset: String,
    pub loss: f64,
    pub auc: Option<f64>,
    pub acc: f64,
    pub baseline: f64,
    pub delta: f64,
}

impl MetricsRow {
    fn from_metrics(layer: String, subset: &str, m: &EvalMetrics) -> Self {
        Self {
            layer,
            subset: subset.into(),
            loss: m.loss,
            auc: m.auc,
            acc: m.accuracy,
            baseline: m.random_baseline,
            delta: m.delta,
        }
    }

    fn from_summary(layer: &str, subset: &str, m: &MetricSummary) -> Self {
        Self {
            layer: layer.into(),
            subset: subset.into(),
            loss: m.loss,
            auc: m.auc,
            acc: m.accuracy,
            baseline: m.random_baseline,
            delta: m.delta,
        }
    }
}

/// Per-layer train and test rows followed by `mean` and `std` rows.
pub fn metrics_rows(run: &ProbeRun) -> Vec<MetricsRow> {
    let mut rows = Vec::with_capacity(2 * run.layers.len() + 4);
    for r in &run.layers {
        rows.push(MetricsRow::from_metrics(r.params.layer.to_string(), "train", &r.train));
        rows.push(MetricsRow::from_metrics(r.params.layer.to_string(), "test", &r.test));
    }
    for (name, pick) in [("mean", true), ("std", false)] {
        for (subset, agg) in [("train", &run.train_aggregate), ("test", &run.test_aggregate)] {
            rows.push(MetricsRow::from_summary(name, subset, if pick { &agg.mean } else { &agg.std }));
        }
    }
    rows
}

pub fn write_metrics_csv(path: &Path, run: &ProbeRun) -> Result<()> {
    crate::report::write_csv(path, &metrics_rows(run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Category;
    use crate::labeling::{Label, SampleLabel};
    use crate::labeling::BandConfig;

    fn labeled(n: usize, excluded_every: usize) -> LabeledDataset {
        let labels = (0..n)
            .map(|i| SampleLabel {
                sample_id: format!("s{i}"),
                category: Category::Movie,
                label: if excluded_every > 0 && i % excluded_every == 0 {
                    Label::Excluded
                } else if i % 2 == 0 {
                    Label::Known
                } else {
                    Label::Forgotten
                },
                known_count: 0,
                forgotten_count: 0,
            })
            .collect();
        LabeledDataset::from_labels(BandConfig::default(), 1000, labels)
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = labeled(10, 0);
        let s = split(&ds, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (7, 3));
        assert_eq!(s, split(&ds, &SplitSpec::default()).unwrap());
        assert_eq!(train_size(70, 0.7), 49);
    }

    #[test]
    fn split_skips_excluded() {
        let ds = labeled(30, 3);
        let s = split(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(s.train.len() + s.test.len(), 20);
        assert!(s.train.iter().chain(&s.test).all(|id| ds.get(id).unwrap().label != Label::Excluded));
        assert!(split(&labeled(1, 0), &SplitSpec::default()).is_err());
    }

    #[test]
    fn single_class_training_is_degenerate() {
        let data = Samples::new(1, vec![1.0, 2.0], vec![1, 1]).unwrap();
        assert!(matches!(train_probe(&data, &TrainConfig::default(), 0, 1), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn training_is_deterministic() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let y: Vec<u8> = (0..50).map(|i| (i % 2) as u8).collect();
        let data = Samples::new(4, x, y).unwrap();
        let a = train_probe(&data, &TrainConfig::default(), 1, 3).unwrap();
        let b = train_probe(&data, &TrainConfig::default(), 1, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.len(), 3);
    }

    #[test]
    fn aggregate_uses_sample_std() {
        let m = |acc: f64| EvalMetrics { loss: 0.0, auc: None, accuracy: acc, random_baseline: 0.5, delta: acc - 0.5, n: 1 };
        let a = aggregate(&[m(0.6), m(0.8)]);
        assert!((a.mean.accuracy - 0.7).abs() < 1e-15);
        assert!((a.std.accuracy - 0.02f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.mean.auc, None);
    }
}
