// SPDX-License-Identifier: MIT OR Apache-2.0
//! Probe accuracy across training checkpoints.
//!
//! The toy model has no training run, so this example fabricates one dump per
//! "step" in memory: known samples get rank 1, forgotten ones the last rank,
//! and the class means drift apart as the step grows. It shows the shape of
//! the analysis, not a real learning curve. Point `awarescope checkpoints` at
//! dumps extracted from real checkpoints for that.
//!
//! Usage:
//!   cargo run --release --example checkpoint_curve -- [OUT_DIR]

use std::path::PathBuf;

use awarescope::analysis::{checkpoint_curve, checkpoint_rows};
use awarescope::dataset::Category;
use awarescope::labeling::BandConfig;
use awarescope::probe::{SplitSpec, TrainConfig};
use awarescope::report::{checkpoint_chart, write_csv};
use awarescope::store::{Dump, DumpHeader, LayerMatrix, LayerSource, RankRecord};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

const V: usize = 256;
const D: usize = 32;
const N: usize = 1200;
const LAYERS: usize = 4;

fn stand_in(step: u64, last: u64) -> awarescope::Result<Dump> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(step);
    let progress = (step as f64 / last as f64).sqrt();
    let records: Vec<RankRecord> = (0..N)
        .map(|i| {
            let rank = if i % 2 == 0 { 1 } else { V as u32 };
            RankRecord::new(format!("s{i:04}"), Category::ALL[i % 4], vec![rank], V)
        })
        .collect();
    let layers = (0..LAYERS)
        .map(|l| {
            // Deeper layers separate the classes more.
            let shift = 3.0 * progress * (l + 1) as f64 / LAYERS as f64;
            let data = (0..N * D)
                .map(|j| {
                    let sign = if (j / D) % 2 == 0 { 1.0 } else { -1.0 };
                    (sign * shift + rng.sample::<f64, _>(StandardNormal)) as f32
                })
                .collect();
            LayerMatrix::new(l, N, D, data)
        })
        .collect::<awarescope::Result<_>>()?;
    let mut header = DumpHeader::new("stand-in", LAYERS, D, V, N);
    header.checkpoint_step = Some(step);
    Ok(Dump { header, records, layers })
}

fn main() -> awarescope::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("awarescope-checkpoints"));
    let steps = [0u64, 1_000, 4_000, 16_000, 64_000];
    let dumps = steps.iter().map(|&s| stand_in(s, 64_000)).collect::<awarescope::Result<Vec<_>>>()?;
    let inputs: Vec<(u64, &dyn LayerSource)> = steps.iter().zip(&dumps).map(|(&s, d)| (s, d as &dyn LayerSource)).collect();

    // At the default learning rate a few dozen Adam steps cannot undo an
    // unlucky random init once the classes sit far apart, so train longer.
    let cfg = TrainConfig { epochs: 30, ..TrainConfig::default() };
    let curve = checkpoint_curve(&inputs, &BandConfig::new(76, 0.3), &SplitSpec::default(), &cfg)?;
    println!("{:>7}  baseline  test accuracy per layer", "step");
    for (i, step) in curve.steps.iter().enumerate() {
        let accs: Vec<String> = curve.test_accuracy[i].iter().map(|a| format!("{a:.3}")).collect();
        println!("{step:>7}  {:>8.3}  {}", curve.test_baseline[i], accs.join("  "));
    }

    std::fs::create_dir_all(&out)?;
    write_csv(&out.join("checkpoints.csv"), &checkpoint_rows(&curve))?;
    std::fs::write(out.join("checkpoints.svg"), checkpoint_chart(&curve))?;
    println!("wrote {}", out.display());
    Ok(())
}
