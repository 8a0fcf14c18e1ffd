// SPDX-License-Identifier: MIT OR Apache-2.0
//! Trains probes on unperturbed prompts, then evaluates them frozen on dumps
//! extracted from each prompt perturbation. Labels and the test split come
//! from the unperturbed dump throughout.
//!
//! Usage:
//!   cargo run --release --example perturbation_robustness -- [OUT_DIR]

use std::collections::BTreeMap;
use std::path::PathBuf;

use awarescope::analysis::{perturbation_eval, robustness_rows};
use awarescope::extract::synthetic_toy_dump;
use awarescope::labeling::{label_dataset, BandConfig};
use awarescope::probe::{split, train_all_layers, SplitSpec, TrainConfig};
use awarescope::prompting::PerturbationKind;
use awarescope::report::{robustness_chart, write_csv};
use awarescope::store::{Dump, LayerSource};
use awarescope::toy_model::{seeded_weights, ModelConfig};

fn main() -> awarescope::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("awarescope-robustness"));
    let weights = seeded_weights(ModelConfig::default(), 0)?;
    let per_cat = 15;

    let (_, base) = synthetic_toy_dump(&weights, per_cat, 73, PerturbationKind::None)?;
    let labeled = label_dataset(&base.records, &BandConfig::new(76, 0.3))?;
    let s = split(&labeled, &SplitSpec::default())?;
    let run = train_all_layers(&base, &labeled, &s, &TrainConfig::default())?;

    let variants: Vec<(PerturbationKind, Dump)> = PerturbationKind::ALL[1..]
        .iter()
        .map(|&k| synthetic_toy_dump(&weights, per_cat, 73, k).map(|(_, d)| (k, d)))
        .collect::<awarescope::Result<_>>()?;
    let map: BTreeMap<PerturbationKind, &dyn LayerSource> =
        variants.iter().map(|(k, d)| (*k, d as &dyn LayerSource)).collect();

    let report = perturbation_eval(&run, &base, &labeled, &s, &map)?;
    println!("train accuracy {:.3} ({:.3})", report.train.mean.accuracy, report.train.std.accuracy);
    for row in &report.rows {
        let t = &row.test;
        println!(
            "{:<20} loss {:.3} ({:.3})  acc {:.3} ({:.3})",
            row.perturbation.as_str(),
            t.mean.loss,
            t.std.loss,
            t.mean.accuracy,
            t.std.accuracy
        );
    }

    std::fs::create_dir_all(&out)?;
    write_csv(&out.join("robustness.csv"), &robustness_rows(&report))?;
    std::fs::write(out.join("robustness.svg"), robustness_chart(&report))?;
    println!("wrote {}", out.display());
    Ok(())
}
