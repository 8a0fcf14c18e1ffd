// SPDX-License-Identifier: MIT OR Apache-2.0

//! A small deterministic decoder-only transformer.
//!
//! Byte-level vocabulary, learned positional embeddings, pre-norm blocks with
//! causal multi-head attention and a GELU MLP. Only the forward pass exists;
//! it exposes the post-block residual stream of every layer and the output
//! logits, which is all the probing pipeline needs. All arithmetic is `f32`
//! with `f64` accumulation in reductions.

mod config;
mod forward;
mod weights;

pub use config::ModelConfig;
pub use forward::{forward, gold_ranks, rank_of, ForwardTrace};
pub(crate) use forward::forced_pass;
pub use weights::{seeded_weights, LayerWeights, ModelWeights, INIT_STD};

/// Byte-level tokenization: one token per UTF-8 byte.
pub fn tokenize(text: &str) -> Vec<u32> {
    text.bytes().map(u32::from).collect()
}
