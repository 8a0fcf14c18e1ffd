// SPDX-License-Identifier: MIT OR Apache-2.0
//! Builds the fact dataset from saved SPARQL responses instead of the live
//! endpoint. The bundled fixtures hold a handful of entities per category,
//! including bindings that normalization drops.
//!
//! Usage:
//!   cargo run --release --example build_dataset_offline -- [OUT_DIR]

use std::path::{Path, PathBuf};

use awarescope::dataset::{build_dataset_offline, write_facts, Category};

fn main() -> awarescope::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("awarescope-dataset"));
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/wikidata");

    let (facts, manifest) = build_dataset_offline(&fixtures, &Category::ALL, 100)?;

    println!("{} facts, {} bindings dropped", facts.len(), manifest.dropped_bindings);
    for (cat, n) in &manifest.entity_counts {
        println!("  {cat:<7} {n} entities");
    }
    for (key, n) in &manifest.fact_counts {
        println!("  {key:<28} {n}");
    }
    for f in facts.iter().take(4) {
        println!("  e.g. {} -> {:?}", f.sample_id, f.attribute_text);
    }

    std::fs::create_dir_all(&out)?;
    write_facts(&out.join("facts.jsonl"), &facts)?;
    std::fs::write(out.join("build_manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    println!("wrote {}", out.display());
    Ok(())
}
