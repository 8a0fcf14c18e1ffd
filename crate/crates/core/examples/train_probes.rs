// SPDX-License-Identifier: MIT OR Apache-2.0
//! Trains one logistic probe per layer on a labeled toy dump and prints the
//! per-layer train and test metrics, then repeats with three seeds.
//!
//! The toy model is untrained, so do not expect the probes to beat the
//! majority baseline by much. Swap in a real dump with `awarescope extract`
//! output for meaningful numbers.
//!
//! Usage:
//!   cargo run --release --example train_probes -- [OUT_DIR]

use std::path::PathBuf;

use awarescope::extract::synthetic_toy_dump;
use awarescope::labeling::{label_dataset, BandConfig};
use awarescope::probe::{split, train_all_layers, train_all_layers_seeds, write_metrics_csv, write_probes, SplitSpec, TrainConfig, DEFAULT_SEEDS};
use awarescope::prompting::PerturbationKind;
use awarescope::toy_model::{seeded_weights, ModelConfig};

fn main() -> awarescope::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("awarescope-probes"));
    let weights = seeded_weights(ModelConfig::default(), 0)?;
    let (_, dump) = synthetic_toy_dump(&weights, 30, 73, PerturbationKind::None)?;
    let labeled = label_dataset(&dump.records, &BandConfig::new(76, 0.3))?;
    let s = split(&labeled, &SplitSpec::default())?;
    let cfg = TrainConfig::default();

    let run = train_all_layers(&dump, &labeled, &s, &cfg)?;
    println!("{} train / {} test", run.n_train, run.n_test);
    println!("layer  lr        train acc  test acc  test auc  baseline  delta");
    for r in &run.layers {
        println!(
            "{:>5}  {:.3e}  {:>9.3}  {:>8.3}  {:>8}  {:>8.3}  {:+.3}",
            r.params.layer,
            r.lr,
            r.train.accuracy,
            r.test.accuracy,
            r.test.auc.map_or("-".into(), |a| format!("{a:.3}")),
            r.test.random_baseline,
            r.test.delta
        );
    }
    let t = &run.test_aggregate;
    println!("test accuracy {:.3} ({:.3}) across layers", t.mean.accuracy, t.std.accuracy);

    let (_, per_layer) = train_all_layers_seeds(&dump, &labeled, &s, &cfg, &DEFAULT_SEEDS)?;
    for l in &per_layer {
        println!("layer {} over seeds {DEFAULT_SEEDS:?}: test acc {:.3} ({:.3})", l.layer, l.test.mean.accuracy, l.test.std.accuracy);
    }

    std::fs::create_dir_all(&out)?;
    write_probes(&out.join("probes.json"), &run)?;
    write_metrics_csv(&out.join("metrics.csv"), &run)?;
    println!("wrote {}", out.display());
    Ok(())
}
