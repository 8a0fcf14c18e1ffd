// SPDX-License-Identifier: MIT OR Apache-2.0

use super::config::ModelConfig;
use super::weights::ModelWeights;
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

/// Per-layer post-block residual streams and output logits of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub n_layers: usize,
    pub seq_len: usize,
    pub d_model: usize,
    pub vocab_size: usize,
    residuals: Vec<f32>,
    logits: Vec<f32>,
}

impl ForwardTrace {
    /// Residual stream after block `layer` at position `pos`.
    pub fn residual(&self, layer: usize, pos: usize) -> &[f32] {
        let start = (layer * self.seq_len + pos) * self.d_model;
        &self.residuals[start..start + self.d_model]
    }

    pub fn logits(&self, pos: usize) -> &[f32] {
        &self.logits[pos * self.vocab_size..(pos + 1) * self.vocab_size]
    }
}

fn layer_norm(x: &[f32], scale: &[f32], offset: &[f32]) -> Vec<f32> {
    let n = x.len() as f64;
    let mean = x.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = x.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    x.iter()
        .zip(scale.iter().zip(offset))
        .map(|(&v, (&s, &o))| ((v as f64 - mean) * inv * s as f64 + o as f64) as f32)
        .collect()
}

/// `y = x W + b` with `W` laid out `[n_in][n_out]`; accumulates in f64.
fn affine(x: &[f32], w: &[f32], b: &[f32], n_out: usize) -> Vec<f32> {
    let mut acc: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    for (i, &xi) in x.iter().enumerate() {
        let xi = xi as f64;
        let row = &w[i * n_out..(i + 1) * n_out];
        for (a, &wij) in acc.iter_mut().zip(row) {
            *a += xi * wij as f64;
        }
    }
    acc.into_iter().map(|v| v as f32).collect()
}

/// Tanh approximation of GELU.
fn gelu(x: f32) -> f32 {
    let x = x as f64;
    let c = (2.0 / std::f64::consts::PI).sqrt();
    (0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())) as f32
}

fn check_tokens(config: &ModelConfig, tokens: &[u32]) -> Result<()> {
    if tokens.is_empty() || tokens.len() > config.max_seq_len {
        return Err(Error::input(format!(
            "sequence length {} outside 1..={}",
            tokens.len(),
            config.max_seq_len
        )));
    }
    if let Some(&t) = tokens.iter().find(|&&t| t as usize >= config.vocab_size) {
        return Err(Error::input(format!("token id {t} >= vocab size {}", config.vocab_size)));
    }
    Ok(())
}

/// Pre-norm causal transformer forward pass.
pub fn forward(weights: &ModelWeights, tokens: &[u32]) -> Result<ForwardTrace> {
    let cfg = weights.config;
    check_tokens(&cfg, tokens)?;
    let (d, t_len, dh) = (cfg.d_model, tokens.len(), cfg.d_head());
    let scale = 1.0 / (dh as f64).sqrt();

    let mut stream: Vec<Vec<f32>> = tokens
        .iter()
        .enumerate()
        .map(|(p, &tok)| {
            let te = &weights.tok_emb[tok as usize * d..(tok as usize + 1) * d];
            let pe = &weights.pos_emb[p * d..(p + 1) * d];
            te.iter().zip(pe).map(|(a, b)| a + b).collect()
        })
        .collect();
    let mut residuals = Vec::with_capacity(cfg.n_layers * t_len * d);

    for lw in &weights.layers {
        let normed: Vec<Vec<f32>> = stream.iter().map(|x| layer_norm(x, &lw.ln1_scale, &lw.ln1_offset)).collect();
        let q: Vec<Vec<f32>> = normed.iter().map(|h| affine(h, &lw.w_q, &lw.b_q, d)).collect();
        let k: Vec<Vec<f32>> = normed.iter().map(|h| affine(h, &lw.w_k, &lw.b_k, d)).collect();
        let v: Vec<Vec<f32>> = normed.iter().map(|h| affine(h, &lw.w_v, &lw.b_v, d)).collect();

        for p in 0..t_len {
            let mut mixed = vec![0f32; d];
            for head in 0..cfg.n_heads {
                let r = head * dh..(head + 1) * dh;
                let scores: Vec<f64> = (0..=p)
                    .map(|j| {
                        q[p][r.clone()].iter().zip(&k[j][r.clone()]).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>()
                            * scale
                    })
                    .collect();
                let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                for (i, out) in mixed[r.clone()].iter_mut().enumerate() {
                    let acc: f64 = exps.iter().enumerate().map(|(j, e)| e * v[j][head * dh + i] as f64).sum();
                    *out = (acc / total) as f32;
                }
            }
            let attn_out = affine(&mixed, &lw.w_o, &lw.b_o, d);
            for (x, a) in stream[p].iter_mut().zip(attn_out) {
                *x += a;
            }
        }

        for x in stream.iter_mut() {
            let h = layer_norm(x, &lw.ln2_scale, &lw.ln2_offset);
            let hidden: Vec<f32> = affine(&h, &lw.w_in, &lw.b_in, cfg.d_mlp).into_iter().map(gelu).collect();
            let out = affine(&hidden, &lw.w_out, &lw.b_out, d);
            for (xi, o) in x.iter_mut().zip(out) {
                *xi += o;
            }
        }
        for x in &stream {
            residuals.extend_from_slice(x);
        }
    }

    let mut logits = Vec::with_capacity(t_len * cfg.vocab_size);
    for x in &stream {
        let h = layer_norm(x, &weights.ln_f_scale, &weights.ln_f_offset);
        logits.extend(affine(&h, &weights.unembed, &vec![0.0; cfg.vocab_size], cfg.vocab_size));
    }
    Ok(ForwardTrace { n_layers: cfg.n_layers, seq_len: t_len, d_model: d, vocab_size: cfg.vocab_size, residuals, logits })
}

/// 1-based rank of `token` in `row`: descending logit, ties by ascending id.
pub fn rank_of(row: &[f32], token: u32) -> u32 {
    let g = token as usize;
    let target = row[g];
    let above = row
        .iter()
        .enumerate()
        .filter(|&(j, &v)| v > target || (v == target && j < g))
        .count();
    above as u32 + 1
}

/// Teacher-forced ranks of each gold token.
///
/// The rank of `gold[i]` is read at the position that predicts it, with the
/// prompt and `gold[..i]` as context. One forward pass covers all positions.
pub fn gold_ranks(weights: &ModelWeights, prompt: &[u32], gold: &[u32]) -> Result<Vec<u32>> {
    Ok(forced_pass(weights, prompt, gold)?.1)
}

/// Runs prompt + gold prefix once, returning the trace and the gold ranks.
pub(crate) fn forced_pass(weights: &ModelWeights, prompt: &[u32], gold: &[u32]) -> Result<(ForwardTrace, Vec<u32>)> {
    if prompt.is_empty() {
        return Err(Error::input("empty prompt"));
    }
    if gold.is_empty() {
        return Err(Error::input("gold token sequence is empty"));
    }
    if let Some(&t) = gold.iter().find(|&&t| t as usize >= weights.config.vocab_size) {
        return Err(Error::input(format!("gold token id {t} >= vocab size {}", weights.config.vocab_size)));
    }
    let mut seq = prompt.to_vec();
    seq.extend_from_slice(&gold[..gold.len() - 1]);
    if seq.len() > weights.config.max_seq_len {
        return Err(Error::input(format!(
            "prompt ({}) plus gold prefix ({}) exceeds max_seq_len {}",
            prompt.len(),
            gold.len() - 1,
            weights.config.max_seq_len
        )));
    }
    let trace = forward(weights, &seq)?;
    let ranks = gold
        .iter()
        .enumerate()
        .map(|(i, &g)| rank_of(trace.logits(prompt.len() - 1 + i), g))
        .collect();
    Ok((trace, ranks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy_model::seeded_weights;

    fn tiny() -> ModelWeights {
        let cfg = ModelConfig { n_layers: 2, d_model: 8, n_heads: 2, d_mlp: 16, vocab_size: 13, max_seq_len: 12 };
        seeded_weights(cfg, 5).unwrap()
    }

    #[test]
    fn trace_shapes_match_config() {
        let w = tiny();
        let tr = forward(&w, &[1, 2, 3, 4, 5]).unwrap();
        assert_eq!((tr.n_layers, tr.seq_len, tr.d_model, tr.vocab_size), (2, 5, 8, 13));
        assert_eq!(tr.residual(1, 4).len(), 8);
        assert_eq!(tr.logits(4).len(), 13);
        assert!(tr.logits.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let w = tiny();
        let tr = forward(&w, &[0, 12, 7, 7]).unwrap();
        for p in 0..4 {
            let row = tr.logits(p);
            let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
            let z: f64 = row.iter().map(|&v| (v as f64 - max).exp()).sum();
            let total: f64 = row.iter().map(|&v| (v as f64 - max).exp() / z).sum();
            assert!((total - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn out_of_range_tokens_and_lengths_fail() {
        let w = tiny();
        assert!(matches!(forward(&w, &[13]), Err(Error::Input(_))));
        assert!(matches!(forward(&w, &[]), Err(Error::Input(_))));
        assert!(matches!(forward(&w, &[1; 13]), Err(Error::Input(_))));
        assert!(matches!(gold_ranks(&w, &[1; 10], &[1, 2, 3, 4]), Err(Error::Input(_))));
        assert!(matches!(gold_ranks(&w, &[1], &[]), Err(Error::Input(_))));
    }

    #[test]
    fn all_equal_logits_rank_by_token_id() {
        let row = vec![0.25f32; 10];
        for g in 0..10 {
            assert_eq!(rank_of(&row, g), g + 1);
        }
    }

    #[test]
    fn three_gold_tokens_give_three_ranks() {
        let w = tiny();
        let ranks = gold_ranks(&w, &[3, 1, 4], &[1, 5, 9]).unwrap();
        assert_eq!(ranks.len(), 3);
        assert!(ranks.iter().all(|&r| (1..=13).contains(&r)));
    }
}
