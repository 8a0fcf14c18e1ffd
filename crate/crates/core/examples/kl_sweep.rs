// SPDX-License-Identifier: MIT OR Apache-2.0
//! Sweeps the known threshold `k` and the forgotten fraction `l`, relabeling
//! and retraining probes for each cell, and renders the result as a heatmap.
//! Cells whose bands overlap are reported as invalid.
//!
//! Usage:
//!   cargo run --release --example kl_sweep -- [OUT_DIR]

use std::path::PathBuf;

use awarescope::analysis::{kl_sweep, sweep_rows, SweepGrid};
use awarescope::extract::synthetic_toy_dump;
use awarescope::probe::{SplitSpec, TrainConfig};
use awarescope::prompting::PerturbationKind;
use awarescope::report::{sweep_cell_text, sweep_heatmap, write_csv};
use awarescope::toy_model::{seeded_weights, ModelConfig};

fn main() -> awarescope::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("awarescope-sweep"));
    let weights = seeded_weights(ModelConfig::default(), 0)?;
    let (_, dump) = synthetic_toy_dump(&weights, 20, 73, PerturbationKind::None)?;

    // Scaled to a 256-symbol vocabulary.
    let grid = SweepGrid { k: vec![5, 20, 76, 150], l: vec![0.2, 0.3, 0.5] };
    let cells = kl_sweep(&dump, &grid, &SplitSpec::default(), &TrainConfig::default(), None)?;

    print!("{:>6}", "l \\ k");
    for k in &grid.k {
        print!("{k:>14}");
    }
    println!();
    for (i, l) in grid.l.iter().enumerate() {
        print!("{l:>6}");
        for cell in &cells[i * grid.k.len()..(i + 1) * grid.k.len()] {
            print!("{:>14}", sweep_cell_text(cell));
        }
        println!();
    }
    println!("(test delta / train delta at the best layer)");

    std::fs::create_dir_all(&out)?;
    write_csv(&out.join("sweep.csv"), &sweep_rows(&cells))?;
    std::fs::write(out.join("sweep_heatmap.svg"), sweep_heatmap(&cells))?;
    println!("wrote {}", out.display());
    Ok(())
}
