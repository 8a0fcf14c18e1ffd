// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INIT_WEIGHT_STD: f64 = 0.02;

/// Row-major feature matrix with binary targets (1 = known, 0 = forgotten).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    pub d: usize,
    pub x: Vec<f64>,
    pub y: Vec<u8>,
}

impl Samples {
    pub fn new(d: usize, x: Vec<f64>, y: Vec<u8>) -> Result<Self> {
        if d == 0 || x.len() != d * y.len() {
            return Err(Error::input(format!("{} features do not form {} rows of width {d}", x.len(), y.len())));
        }
        if let Some(v) = y.iter().find(|&&v| v > 1) {
            return Err(Error::input(format!("label {v} is not 0 or 1")));
        }
        Ok(Self { d, x, y })
    }

    /// Collects rows of an `f32` matrix.
    pub fn from_rows<'a>(d: usize, rows: impl IntoIterator<Item = (&'a [f32], u8)>) -> Result<Self> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (row, t) in rows {
            if row.len() != d {
                return Err(Error::input(format!("row of width {} where {d} was expected", row.len())));
            }
            x.extend(row.iter().map(|&v| f64::from(v)));
            y.push(t);
        }
        Self::new(d, x, y)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub layer: usize,
    pub w: Vec<f64>,
    pub b: f64,
}

/// Bias alternates `+0.1, -0.1, ...` by layer; weights are `N(0, 0.02^2)`
/// drawn from a generator seeded with `base_seed + 100 * layer`.
pub fn init_probe(layer: usize, d_model: usize, base_seed: u64) -> ProbeParams {
    let mut rng = ChaCha8Rng::seed_from_u64(layer_seed(base_seed, layer));
    let normal = Normal::new(0.0, INIT_WEIGHT_STD).expect("valid std");
    let w = (0..d_model).map(|_| normal.sample(&mut rng)).collect();
    let b = if layer % 2 == 0 { 0.1 } else { -0.1 };
    ProbeParams { layer, w, b }
}

pub fn layer_seed(base_seed: u64, layer: usize) -> u64 {
    base_seed.wrapping_add(100 * layer as u64)
}

/// `base_lr * (1.1 - 0.2 * layer / n_layers)`.
pub fn layer_lr(base_lr: f64, layer: usize, n_layers: usize) -> f64 {
    base_lr * (1.1 - 0.2 * layer as f64 / n_layers as f64)
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

pub fn probe_forward(params: &ProbeParams, x: &[f64]) -> Result<f64> {
    if x.len() != params.w.len() {
        return Err(Error::input(format!("input of width {} for a probe of width {}", x.len(), params.w.len())));
    }
    Ok(dot(&params.w, x) + params.b)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of logit `z` against `y`, stable for large `|z|`.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub w: Vec<f64>,
    pub b: f64,
}

/// Mean BCE plus `weight_decay / 2 * |w|^2`, with its gradient.
pub fn loss_and_grad(params: &ProbeParams, batch: &Samples, weight_decay: f64) -> Result<Gradient> {
    let rows: Vec<usize> = (0..batch.len()).collect();
    loss_and_grad_rows(params, batch, &rows, weight_decay)
}

pub(crate) fn loss_and_grad_rows(
    params: &ProbeParams,
    data: &Samples,
    rows: &[usize],
    weight_decay: f64,
) -> Result<Gradient> {
    if rows.is_empty() {
        return Err(Error::input("empty batch"));
    }
    if data.d != params.w.len() {
        return Err(Error::input(format!("data width {} for a probe of width {}", data.d, params.w.len())));
    }
    let mut gw = vec![0.0; data.d];
    let mut gb = 0.0;
    let mut loss = 0.0;
    for &i in rows {
        let x = data.row(i);
        let y = f64::from(data.y[i]);
        let z = dot(&params.w, x) + params.b;
        loss += bce_with_logit(z, y);
        let r = sigmoid(z) - y;
        gb += r;
        for (g, xi) in gw.iter_mut().zip(x) {
            *g += r * xi;
        }
    }
    let n = rows.len() as f64;
    let decay = 0.5 * weight_decay * params.w.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in gw.iter_mut().zip(&params.w) {
        *g = *g / n + weight_decay * w;
    }
    Ok(Gradient { loss: loss / n + decay, w: gw, b: gb / n })
}
