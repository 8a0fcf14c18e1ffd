// SPDX-License-Identifier: MIT OR Apache-2.0
//! Renders one fact under every prompt perturbation, then compares the four
//! template sets on the same fact.
//!
//! Usage:
//!   cargo run --release --example render_prompts

use awarescope::dataset::synthetic_facts;
use awarescope::prompting::{render, PerturbationKind, TemplateId, TemplateSet};

fn main() -> awarescope::Result<()> {
    let facts = synthetic_facts(4, 7);
    let fact = &facts[0];
    let templates = TemplateSet::shipped(TemplateId::Template2Balanced);

    println!("fact {} (answer {:?})\n", fact.sample_id, fact.attribute_text);
    for kind in PerturbationKind::ALL {
        let p = render(fact, &templates, kind, &facts, 73)?;
        println!("[{kind}]");
        println!("{}", p.text);
        if !p.few_shot_sample_ids.is_empty() {
            println!("  context: {}", p.few_shot_sample_ids.join(", "));
        }
        println!("  final token starts at byte {}\n", p.final_token_char_offset());
    }

    for id in [TemplateId::Template1, TemplateId::Template1ConstEnd, TemplateId::Template2, TemplateId::Template2Balanced] {
        let set = TemplateSet::shipped(id);
        match render(fact, &set, PerturbationKind::None, &facts, 73) {
            Ok(p) => println!("{:<20} {}", id.as_str(), p.text),
            Err(e) => println!("{:<20} ({e})", id.as_str()),
        }
    }
    Ok(())
}
