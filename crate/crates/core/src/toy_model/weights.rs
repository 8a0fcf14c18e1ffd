// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;

use serde_json::{Map, Value};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::seeding::SplitMix64;
use crate::tensors::{self, NamedTensor};

/// Standard deviation of the Gaussian used for every weight matrix.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub ln1_scale: Vec<f32>,
    pub ln1_offset: Vec<f32>,
    /// `[d_model][d_model]`, row-major, input index first.
    pub w_q: Vec<f32>,
    pub b_q: Vec<f32>,
    pub w_k: Vec<f32>,
    pub b_k: Vec<f32>,
    pub w_v: Vec<f32>,
    pub b_v: Vec<f32>,
    pub w_o: Vec<f32>,
    pub b_o: Vec<f32>,
    pub ln2_scale: Vec<f32>,
    pub ln2_offset: Vec<f32>,
    /// `[d_model][d_mlp]`
    pub w_in: Vec<f32>,
    pub b_in: Vec<f32>,
    /// `[d_mlp][d_model]`
    pub w_out: Vec<f32>,
    pub b_out: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    pub seed: u64,
    /// `[vocab_size][d_model]`
    pub tok_emb: Vec<f32>,
    /// `[max_seq_len][d_model]`
    pub pos_emb: Vec<f32>,
    pub layers: Vec<LayerWeights>,
    pub ln_f_scale: Vec<f32>,
    pub ln_f_offset: Vec<f32>,
    /// `[d_model][vocab_size]`
    pub unembed: Vec<f32>,
}

fn gaussian(rng: &mut SplitMix64, n: usize) -> Vec<f32> {
    (0..n).map(|_| (rng.next_normal() * INIT_STD) as f32).collect()
}

/// Deterministic initialization: every matrix from one SplitMix64/Box-Muller
/// stream, drawn in tensor-name order; biases zero; norms scale 1 offset 0.
pub fn seeded_weights(config: ModelConfig, seed: u64) -> Result<ModelWeights> {
    config.validate()?;
    let ModelConfig { d_model: d, d_mlp: m, vocab_size: v, max_seq_len: t, .. } = config;
    let mut rng = SplitMix64::new(seed);
    let tok_emb = gaussian(&mut rng, v * d);
    let pos_emb = gaussian(&mut rng, t * d);
    let layers = (0..config.n_layers)
        .map(|_| LayerWeights {
            ln1_scale: vec![1.0; d],
            ln1_offset: vec![0.0; d],
            w_q: gaussian(&mut rng, d * d),
            b_q: vec![0.0; d],
            w_k: gaussian(&mut rng, d * d),
            b_k: vec![0.0; d],
            w_v: gaussian(&mut rng, d * d),
            b_v: vec![0.0; d],
            w_o: gaussian(&mut rng, d * d),
            b_o: vec![0.0; d],
            ln2_scale: vec![1.0; d],
            ln2_offset: vec![0.0; d],
            w_in: gaussian(&mut rng, d * m),
            b_in: vec![0.0; m],
            w_out: gaussian(&mut rng, m * d),
            b_out: vec![0.0; d],
        })
        .collect();
    let unembed = gaussian(&mut rng, d * v);
    Ok(ModelWeights {
        config,
        seed,
        tok_emb,
        pos_emb,
        layers,
        ln_f_scale: vec![1.0; d],
        ln_f_offset: vec![0.0; d],
        unembed,
    })
}

impl ModelWeights {
    /// Tensors in canonical file order.
    pub fn to_tensors(&self) -> Vec<NamedTensor> {
        let ModelConfig { d_model: d, d_mlp: m, vocab_size: v, max_seq_len: t, .. } = self.config;
        let mut out = vec![
            NamedTensor::new("tok_emb", vec![v, d], self.tok_emb.clone()),
            NamedTensor::new("pos_emb", vec![t, d], self.pos_emb.clone()),
        ];
        for (l, lw) in self.layers.iter().enumerate() {
            let p = |s: &str| format!("layers.{l}.{s}");
            out.extend([
                NamedTensor::new(p("ln1.scale"), vec![d], lw.ln1_scale.clone()),
                NamedTensor::new(p("ln1.offset"), vec![d], lw.ln1_offset.clone()),
                NamedTensor::new(p("attn.w_q"), vec![d, d], lw.w_q.clone()),
                NamedTensor::new(p("attn.b_q"), vec![d], lw.b_q.clone()),
                NamedTensor::new(p("attn.w_k"), vec![d, d], lw.w_k.clone()),
                NamedTensor::new(p("attn.b_k"), vec![d], lw.b_k.clone()),
                NamedTensor::new(p("attn.w_v"), vec![d, d], lw.w_v.clone()),
                NamedTensor::new(p("attn.b_v"), vec![d], lw.b_v.clone()),
                NamedTensor::new(p("attn.w_o"), vec![d, d], lw.w_o.clone()),
                NamedTensor::new(p("attn.b_o"), vec![d], lw.b_o.clone()),
                NamedTensor::new(p("ln2.scale"), vec![d], lw.ln2_scale.clone()),
                NamedTensor::new(p("ln2.offset"), vec![d], lw.ln2_offset.clone()),
                NamedTensor::new(p("mlp.w_in"), vec![d, m], lw.w_in.clone()),
                NamedTensor::new(p("mlp.b_in"), vec![m], lw.b_in.clone()),
                NamedTensor::new(p("mlp.w_out"), vec![m, d], lw.w_out.clone()),
                NamedTensor::new(p("mlp.b_out"), vec![d], lw.b_out.clone()),
            ]);
        }
        out.extend([
            NamedTensor::new("ln_f.scale", vec![d], self.ln_f_scale.clone()),
            NamedTensor::new("ln_f.offset", vec![d], self.ln_f_offset.clone()),
            NamedTensor::new("unembed", vec![d, v], self.unembed.clone()),
        ]);
        out
    }

    /// Serialized `toy_weights.bin` bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut extra = Map::new();
        extra.insert("config".into(), serde_json::to_value(self.config)?);
        extra.insert("seed".into(), Value::from(self.seed));
        tensors::encode(extra, &self.to_tensors())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (extra, mut ts) = tensors::decode(bytes)?;
        let config: ModelConfig = serde_json::from_value(
            extra.get("config").cloned().ok_or_else(|| Error::validation("weight file has no config"))?,
        )
        .map_err(|e| Error::validation(format!("weight file config: {e}")))?;
        config.validate()?;
        let seed = extra.get("seed").and_then(Value::as_u64).unwrap_or(0);
        let ModelConfig { d_model: d, d_mlp: m, vocab_size: v, max_seq_len: t, .. } = config;
        let ts = &mut ts;
        let tok_emb = tensors::take(ts, "tok_emb", &[v, d])?;
        let pos_emb = tensors::take(ts, "pos_emb", &[t, d])?;
        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let p = |s: &str| format!("layers.{l}.{s}");
            layers.push(LayerWeights {
                ln1_scale: tensors::take(ts, &p("ln1.scale"), &[d])?,
                ln1_offset: tensors::take(ts, &p("ln1.offset"), &[d])?,
                w_q: tensors::take(ts, &p("attn.w_q"), &[d, d])?,
                b_q: tensors::take(ts, &p("attn.b_q"), &[d])?,
                w_k: tensors::take(ts, &p("attn.w_k"), &[d, d])?,
                b_k: tensors::take(ts, &p("attn.b_k"), &[d])?,
                w_v: tensors::take(ts, &p("attn.w_v"), &[d, d])?,
                b_v: tensors::take(ts, &p("attn.b_v"), &[d])?,
                w_o: tensors::take(ts, &p("attn.w_o"), &[d, d])?,
                b_o: tensors::take(ts, &p("attn.b_o"), &[d])?,
                ln2_scale: tensors::take(ts, &p("ln2.scale"), &[d])?,
                ln2_offset: tensors::take(ts, &p("ln2.offset"), &[d])?,
                w_in: tensors::take(ts, &p("mlp.w_in"), &[d, m])?,
                b_in: tensors::take(ts, &p("mlp.b_in"), &[m])?,
                w_out: tensors::take(ts, &p("mlp.w_out"), &[m, d])?,
                b_out: tensors::take(ts, &p("mlp.b_out"), &[d])?,
            });
        }
        Ok(ModelWeights {
            config,
            seed,
            tok_emb,
            pos_emb,
            layers,
            ln_f_scale: tensors::take(ts, "ln_f.scale", &[d])?,
            ln_f_offset: tensors::take(ts, "ln_f.offset", &[d])?,
            unembed: tensors::take(ts, "unembed", &[d, v])?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig { n_layers: 2, d_model: 8, n_heads: 2, d_mlp: 16, vocab_size: 11, max_seq_len: 6 }
    }

    #[test]
    fn same_seed_gives_identical_bytes() {
        let a = seeded_weights(small(), 3).unwrap().to_bytes().unwrap();
        let b = seeded_weights(small(), 3).unwrap().to_bytes().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        assert_ne!(seeded_weights(small(), 1).unwrap(), seeded_weights(small(), 2).unwrap());
    }

    #[test]
    fn norms_start_at_identity() {
        let w = seeded_weights(small(), 1).unwrap();
        assert!(w.ln_f_scale.iter().all(|&s| s == 1.0));
        assert!(w.layers.iter().all(|l| l.ln1_scale.iter().chain(&l.ln2_scale).all(|&s| s == 1.0)));
        assert!(w.layers.iter().all(|l| l.ln1_offset.iter().all(|&o| o == 0.0)));
    }

    #[test]
    fn weight_file_round_trips() {
        let w = seeded_weights(small(), 9).unwrap();
        let back = ModelWeights::from_bytes(&w.to_bytes().unwrap()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = ModelConfig { n_heads: 3, ..small() };
        assert!(matches!(seeded_weights(cfg, 0), Err(Error::Config(_))));
    }
}
