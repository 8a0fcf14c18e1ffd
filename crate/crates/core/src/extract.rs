// SPDX-License-Identifier: MIT OR Apache-2.0

//! Activation extraction with the built-in toy model.
//!
//! For every rendered prompt the gold attribute (with a leading space) is
//! teacher-forced after the prompt. The dump receives the post-block residual
//! of the final prompt token at every layer plus the gold-token ranks.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::dataset::{synthetic_facts, FactRecord};
use crate::error::{Error, Result};
use crate::prompting::{render_all, PerturbationKind, RenderedPrompt, TemplateId, TemplateSet};
use crate::store::{sample_order_hash, Dump, DumpHeader, LayerMatrix, RankRecord};
use crate::toy_model::{forced_pass, tokenize, ModelWeights};

/// Identifies the model in dump headers.
pub fn toy_model_id(weights: &ModelWeights) -> String {
    let c = &weights.config;
    format!("toy-L{}-d{}-seed{}", c.n_layers, c.d_model, weights.seed)
}

/// Gold continuation for a fact: the attribute preceded by a space.
pub fn gold_text(fact: &FactRecord) -> String {
    format!(" {}", fact.attribute_text)
}

/// Drops leading prompt tokens so that prompt plus gold prefix fits the context.
fn fit_prompt(mut prompt: Vec<u32>, gold_len: usize, max_seq_len: usize) -> Result<Vec<u32>> {
    let room = max_seq_len
        .checked_sub(gold_len.saturating_sub(1))
        .filter(|&r| r > 0)
        .ok_or_else(|| Error::input(format!("gold sequence of {gold_len} tokens does not fit max_seq_len {max_seq_len}")))?;
    if prompt.len() > room {
        prompt.drain(..prompt.len() - room);
    }
    Ok(prompt)
}

/// Runs the toy model over `prompts`, pairing each with its fact by sample id.
///
/// All prompts must carry the same perturbation kind; it is recorded in the
/// header. Row order follows `prompts`.
pub fn extract_toy(
    weights: &ModelWeights,
    prompts: &[RenderedPrompt],
    facts: &[FactRecord],
    checkpoint_step: Option<u64>,
) -> Result<Dump> {
    let first = prompts.first().ok_or_else(|| Error::input("no prompts to extract"))?;
    if let Some(p) = prompts.iter().find(|p| p.perturbation != first.perturbation) {
        return Err(Error::consistency(format!(
            "{} has perturbation {} but the batch is {}",
            p.sample_id, p.perturbation, first.perturbation
        )));
    }
    let by_id: HashMap<&str, &FactRecord> = facts.iter().map(|f| (f.sample_id.as_str(), f)).collect();
    let cfg = &weights.config;

    let rows: Vec<(RankRecord, Vec<Vec<f32>>)> = prompts
        .par_iter()
        .map(|p| {
            let fact = by_id
                .get(p.sample_id.as_str())
                .ok_or_else(|| Error::consistency(format!("no fact for prompt {}", p.sample_id)))?;
            let gold = tokenize(&gold_text(fact));
            let prompt = fit_prompt(tokenize(&p.text), gold.len(), cfg.max_seq_len)?;
            let (trace, ranks) = forced_pass(weights, &prompt, &gold)?;
            let pos = prompt.len() - 1;
            let residuals = (0..cfg.n_layers).map(|l| trace.residual(l, pos).to_vec()).collect();
            Ok((RankRecord::new(p.sample_id.clone(), fact.category, ranks, cfg.vocab_size), residuals))
        })
        .collect::<Result<_>>()?;

    let n = rows.len();
    let mut header = DumpHeader::new(toy_model_id(weights), cfg.n_layers, cfg.d_model, cfg.vocab_size, n);
    header.checkpoint_step = checkpoint_step;
    header.perturbation = first.perturbation;
    let mut data = vec![Vec::with_capacity(n * cfg.d_model); cfg.n_layers];
    let mut records = Vec::with_capacity(n);
    for (rec, residuals) in rows {
        records.push(rec);
        for (l, r) in residuals.into_iter().enumerate() {
            data[l].extend(r);
        }
    }
    let layers = data
        .into_iter()
        .enumerate()
        .map(|(l, d)| LayerMatrix::new(l, n, cfg.d_model, d))
        .collect::<Result<_>>()?;
    header.sample_order_hash = sample_order_hash(records.iter().map(|r: &RankRecord| r.sample_id.as_str()));
    Ok(Dump { header, records, layers })
}

/// Synthetic facts rendered with the balanced template set and run through the
/// toy model: the quickest way to a realistic dump.
pub fn synthetic_toy_dump(
    weights: &ModelWeights,
    entities_per_category: usize,
    seed: u64,
    perturbation: PerturbationKind,
) -> Result<(Vec<FactRecord>, Dump)> {
    let facts = synthetic_facts(entities_per_category, seed);
    let templates = TemplateSet::shipped(TemplateId::Template2Balanced);
    let prompts = render_all(&facts, &templates, perturbation, seed)?;
    let dump = extract_toy(weights, &prompts, &facts, None)?;
    Ok((facts, dump))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy_model::{gold_ranks, seeded_weights, ModelConfig};

    fn setup() -> (ModelWeights, Vec<FactRecord>, Vec<RenderedPrompt>) {
        let cfg = ModelConfig { n_layers: 2, d_model: 16, n_heads: 2, d_mlp: 32, ..ModelConfig::default() };
        let w = seeded_weights(cfg, 3).unwrap();
        let facts = synthetic_facts(2, 9);
        let templates = TemplateSet::shipped(TemplateId::Template2Balanced);
        let prompts = render_all(&facts, &templates, PerturbationKind::None, 73).unwrap();
        (w, facts, prompts)
    }

    #[test]
    fn dump_shape_and_ranks() {
        let (w, facts, prompts) = setup();
        let dump = extract_toy(&w, &prompts, &facts, Some(0)).unwrap();
        assert_eq!(dump.header.n_samples, prompts.len());
        assert_eq!(dump.layers.len(), 2);
        let f = &facts[0];
        let p = prompts.iter().position(|p| p.sample_id == f.sample_id).unwrap();
        let expect = gold_ranks(&w, &tokenize(&prompts[p].text), &tokenize(&gold_text(f))).unwrap();
        assert_eq!(dump.records[p].ranks, expect);
    }

    #[test]
    fn long_prompts_are_left_truncated() {
        assert_eq!(fit_prompt(vec![1, 2, 3, 4, 5], 3, 5).unwrap(), vec![3, 4, 5]);
        assert!(fit_prompt(vec![1], 7, 5).is_err());
    }

    #[test]
    fn missing_fact_is_a_consistency_error() {
        let (w, facts, prompts) = setup();
        assert!(matches!(extract_toy(&w, &prompts, &facts[1..], None), Err(Error::Consistency(_))));
    }
}
