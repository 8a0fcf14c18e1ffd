// SPDX-License-Identifier: MIT OR Apache-2.0
//! Seeds the byte-level toy transformer, saves and reloads its weights, and
//! prints teacher-forced gold-token ranks for a few prompts.
//!
//! Usage:
//!   cargo run --release --example toy_model_ranks -- [OUT_DIR]

use std::path::PathBuf;

use awarescope::dataset::synthetic_facts;
use awarescope::extract::gold_text;
use awarescope::prompting::{render, PerturbationKind, TemplateId, TemplateSet};
use awarescope::toy_model::{forward, gold_ranks, seeded_weights, tokenize, ModelConfig, ModelWeights};

fn main() -> awarescope::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("awarescope-toy"));
    std::fs::create_dir_all(&out)?;

    let weights = seeded_weights(ModelConfig::default(), 1234)?;
    let path = out.join("toy_weights.bin");
    weights.save(&path)?;
    let reloaded = ModelWeights::load(&path)?;
    assert_eq!(reloaded, weights);
    println!("saved and reloaded {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());

    let facts = synthetic_facts(2, 3);
    let templates = TemplateSet::shipped(TemplateId::Template2Balanced);
    let v = weights.config.vocab_size;
    for fact in facts.iter().take(6) {
        let prompt = render(fact, &templates, PerturbationKind::None, &facts, 73)?;
        let tokens = tokenize(&prompt.text);
        let gold = tokenize(&gold_text(fact));
        let ranks = gold_ranks(&weights, &tokens, &gold)?;
        println!("{:?} + {:?}", prompt.text, gold_text(fact));
        println!("  ranks (of {v}): {ranks:?}");
    }

    let trace = forward(&weights, &tokenize("The capital is"))?;
    let last = trace.seq_len - 1;
    for l in 0..trace.n_layers {
        let r = trace.residual(l, last);
        let norm = r.iter().map(|x| x * x).sum::<f32>().sqrt();
        println!("layer {l}: residual norm at final token {norm:.3}");
    }
    Ok(())
}
