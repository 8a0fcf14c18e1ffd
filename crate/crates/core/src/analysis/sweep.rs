// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::{label_dataset, BandConfig};
use crate::probe::{split, train_layers, SplitSpec, TrainConfig};
use crate::store::LayerSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub k: Vec<u32>,
    pub l: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { k: vec![1, 5, 10, 50, 100, 500, 1000], l: vec![0.1, 0.2, 0.3, 0.4, 0.5] }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.k.is_empty() || self.l.is_empty() {
            return Err(Error::config("sweep grid axes must be non-empty"));
        }
        if self.k.windows(2).any(|w| w[0] >= w[1]) || self.l.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("sweep grid axes must be strictly ascending"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub k: u32,
    pub l: f64,
    /// `false` when the bands overlap for this vocabulary size.
    pub valid: bool,
    pub n_known: usize,
    pub n_forgotten: usize,
    pub ratio: Option<f64>,
    pub best_layer: Option<usize>,
    pub train_delta: Option<f64>,
    pub test_delta: Option<f64>,
    /// `(layer, train delta, test delta)` for every trained layer.
    pub layer_deltas: Vec<(usize, f64, f64)>,
}

impl SweepCell {
    fn empty(k: u32, l: f64, valid: bool) -> Self {
        Self {
            k,
            l,
            valid,
            n_known: 0,
            n_forgotten: 0,
            ratio: None,
            best_layer: None,
            train_delta: None,
            test_delta: None,
            layer_deltas: vec![],
        }
    }
}

/// Relabels the dump for every `(k, l)` cell and retrains probes on `layers`
/// (all layers when `None`). Each cell reports the layer with the best test delta.
pub fn kl_sweep(
    source: &dyn LayerSource,
    grid: &SweepGrid,
    split_spec: &SplitSpec,
    cfg: &TrainConfig,
    layers: Option<&[usize]>,
) -> Result<Vec<SweepCell>> {
    grid.validate()?;
    let vocab = source.header().vocab_size;
    let all: Vec<usize> = (0..source.header().n_layers).collect();
    let layers = layers.unwrap_or(&all);
    let mut cells = Vec::with_capacity(grid.k.len() * grid.l.len());
    for &l in &grid.l {
        for &k in &grid.k {
            let band = BandConfig::new(k, l);
            if band.validate(vocab).is_err() {
                cells.push(SweepCell::empty(k, l, false));
                continue;
            }
            let labeled = label_dataset(source.records(), &band)?;
            let mut cell = SweepCell::empty(k, l, true);
            cell.n_known = labeled.totals.known;
            cell.n_forgotten = labeled.totals.forgotten;
            cell.ratio = labeled.ratio;
            if cell.n_known > 0 && cell.n_forgotten > 0 {
                let trained = split(&labeled, split_spec).and_then(|s| train_layers(source, &labeled, &s, cfg, layers));
                match trained {
                    Ok(run) => {
                        let best = run.best_layer();
                        cell.best_layer = Some(best.params.layer);
                        cell.train_delta = Some(best.train.delta);
                        cell.test_delta = Some(best.test.delta);
                        cell.layer_deltas =
                            run.layers.iter().map(|r| (r.params.layer, r.train.delta, r.test.delta)).collect();
                    }
                    // A split whose training side holds one class leaves the deltas absent.
                    Err(Error::DegenerateData(_) | Error::Input(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            cells.push(cell);
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: u32,
    pub l: f64,
    pub valid: bool,
    pub n_known: usize,
    pub n_forgotten: usize,
    pub ratio: Option<f64>,
    pub best_layer: Option<usize>,
    pub train_delta: Option<f64>,
    pub test_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLayerRow {
    pub k: u32,
    pub l: f64,
    pub layer: usize,
    pub train_delta: f64,
    pub test_delta: f64,
}

pub fn sweep_rows(cells: &[SweepCell]) -> Vec<SweepRow> {
    cells
        .iter()
        .map(|c| SweepRow {
            k: c.k,
            l: c.l,
            valid: c.valid,
            n_known: c.n_known,
            n_forgotten: c.n_forgotten,
            ratio: c.ratio,
            best_layer: c.best_layer,
            train_delta: c.train_delta,
            test_delta: c.test_delta,
        })
        .collect()
}

pub fn sweep_layer_rows(cells: &[SweepCell]) -> Vec<SweepLayerRow> {
    cells
        .iter()
        .flat_map(|c| {
            c.layer_deltas.iter().map(|&(layer, train_delta, test_delta)| SweepLayerRow {
                k: c.k,
                l: c.l,
                layer,
                train_delta,
                test_delta,
            })
        })
        .collect()
}
