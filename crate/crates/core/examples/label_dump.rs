// SPDX-License-Identifier: MIT OR Apache-2.0
//! Labels a toy dump as known or forgotten from its gold-token ranks and
//! shows how the rank bands move the class balance.
//!
//! With a 256-symbol vocabulary the forgotten band for `l = 0.3` starts above
//! rank 180, so the default `k = 500` overlaps it and is rejected.
//!
//! Usage:
//!   cargo run --release --example label_dump -- [OUT_DIR]

use std::path::PathBuf;

use awarescope::extract::synthetic_toy_dump;
use awarescope::labeling::{label_dataset, write_labels, write_summary, BandConfig};
use awarescope::prompting::PerturbationKind;
use awarescope::toy_model::{seeded_weights, ModelConfig};

fn main() -> awarescope::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("awarescope-labels"));
    let weights = seeded_weights(ModelConfig::default(), 0)?;
    let (_, dump) = synthetic_toy_dump(&weights, 20, 73, PerturbationKind::None)?;
    let v = dump.header.vocab_size;

    if let Err(e) = label_dataset(&dump.records, &BandConfig::default()) {
        println!("default band on V={v}: {e}");
    }

    println!("{:>4} {:>4} {:>6} {:>9} {:>8} {:>6}", "k", "l", "known", "forgotten", "excluded", "ratio");
    for (k, l) in [(10, 0.3), (50, 0.3), (76, 0.3), (100, 0.5), (150, 0.2)] {
        let band = BandConfig::new(k, l);
        match label_dataset(&dump.records, &band) {
            Ok(d) => println!(
                "{k:>4} {l:>4} {:>6} {:>9} {:>8} {:>6}",
                d.totals.known,
                d.totals.forgotten,
                d.totals.excluded,
                d.ratio.map_or("-".into(), |r| format!("{r:.2}"))
            ),
            Err(e) => println!("{k:>4} {l:>4} rejected: {e}"),
        }
    }

    let labeled = label_dataset(&dump.records, &BandConfig::new(76, 0.3))?;
    for (cat, t) in &labeled.per_category {
        println!("  {cat:<7} known {:>3} forgotten {:>3} excluded {:>3}", t.known, t.forgotten, t.excluded);
    }
    std::fs::create_dir_all(&out)?;
    write_labels(&out.join("labels.jsonl"), &labeled)?;
    write_summary(&out.join("label_summary.json"), &labeled)?;
    println!("wrote {}", out.display());
    Ok(())
}
