// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::{label_dataset, BandConfig};
use crate::probe::{split, train_all_layers, SplitSpec, TrainConfig};
use crate::store::LayerSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointCurve {
    /// In input order.
    pub steps: Vec<u64>,
    pub n_layers: usize,
    /// `steps.len() x n_layers`.
    pub train_accuracy: Vec<Vec<f64>>,
    pub test_accuracy: Vec<Vec<f64>>,
    /// Majority-class frequency of each step's test split.
    pub test_baseline: Vec<f64>,
    pub train_baseline: Vec<f64>,
}

/// Labels each checkpoint from its own ranks, splits, and trains a probe per
/// layer. Steps are processed in the given order.
pub fn checkpoint_curve(
    checkpoints: &[(u64, &dyn LayerSource)],
    band: &BandConfig,
    split_spec: &SplitSpec,
    cfg: &TrainConfig,
) -> Result<CheckpointCurve> {
    if checkpoints.len() < 2 {
        return Err(Error::input("a checkpoint curve needs at least two steps"));
    }
    let n_layers = checkpoints[0].1.header().n_layers;
    let mut curve = CheckpointCurve {
        steps: vec![],
        n_layers,
        train_accuracy: vec![],
        test_accuracy: vec![],
        test_baseline: vec![],
        train_baseline: vec![],
    };
    for &(step, source) in checkpoints {
        if source.header().n_layers != n_layers {
            return Err(Error::consistency(format!("step {step} has {} layers, expected {n_layers}", source.header().n_layers)));
        }
        let labeled = label_dataset(source.records(), band)?;
        let s = split(&labeled, split_spec)?;
        let run = train_all_layers(source, &labeled, &s, cfg)?;
        curve.steps.push(step);
        curve.train_accuracy.push(run.layers.iter().map(|r| r.train.accuracy).collect());
        curve.test_accuracy.push(run.layers.iter().map(|r| r.test.accuracy).collect());
        curve.test_baseline.push(run.layers[0].test.random_baseline);
        curve.train_baseline.push(run.layers[0].train.random_baseline);
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub step: u64,
    pub layer: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    pub baseline: f64,
    pub test_delta: f64,
}

pub fn checkpoint_rows(curve: &CheckpointCurve) -> Vec<CheckpointRow> {
    let mut rows = Vec::new();
    for (i, &step) in curve.steps.iter().enumerate() {
        for layer in 0..curve.n_layers {
            let test_acc = curve.test_accuracy[i][layer];
            rows.push(CheckpointRow {
                step,
                layer,
                train_acc: curve.train_accuracy[i][layer],
                test_acc,
                baseline: curve.test_baseline[i],
                test_delta: test_acc - curve.test_baseline[i],
            });
        }
    }
    rows
}
