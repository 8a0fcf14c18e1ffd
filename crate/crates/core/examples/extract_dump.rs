// SPDX-License-Identifier: MIT OR Apache-2.0
//! Runs the toy model over synthetic facts, writes an activation dump,
//! validates it and reads it back.
//!
//! Usage:
//!   cargo run --release --example extract_dump -- [OUT_DIR] [ENTITIES_PER_CATEGORY]

use std::path::PathBuf;

use awarescope::extract::synthetic_toy_dump;
use awarescope::prompting::PerturbationKind;
use awarescope::store::{read_dump, validate, write_dump, DumpDir, LayerSource};
use awarescope::toy_model::{seeded_weights, ModelConfig};

fn main() -> awarescope::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("awarescope-dump"));
    let per_cat: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);

    let weights = seeded_weights(ModelConfig::default(), 0)?;
    let (facts, dump) = synthetic_toy_dump(&weights, per_cat, 73, PerturbationKind::None)?;
    write_dump(&dump.header, &dump.records, &dump.layers, &out)?;
    let dir = out;
    println!("{} facts -> {}", facts.len(), dir.display());
    println!("{}", serde_json::to_string_pretty(&dump.header)?);

    let report = validate(&dir);
    println!("valid: {} ({} issues)", report.ok, report.issues.len());

    let back = read_dump(&dir)?;
    assert_eq!(back.records, dump.records);
    assert_eq!(back.layers, dump.layers);

    // Lazy access reads one layer file at a time.
    let lazy = DumpDir::open(&dir)?;
    let last = lazy.layer(lazy.header().n_layers - 1)?;
    println!("layer {} is {} x {}", last.layer, last.n_rows, last.d_model);
    for r in back.records.iter().take(3) {
        println!("  {} ranks {:?}", r.sample_id, r.ranks);
    }
    Ok(())
}
