// SPDX-License-Identifier: MIT OR Apache-2.0
//! Separation scores for probe logits and for a sparse-autoencoder stand-in.
//!
//! Part one scores hand-made latents where latent 0 fires for known samples
//! and latent 1 for forgotten ones, so the output is easy to check. Part two
//! runs the real path: probes trained on a toy dump, and a random JumpReLU
//! encoder saved to and loaded from a tensor file.
//!
//! Usage:
//!   cargo run --release --example separation_scores -- [OUT_DIR]

use std::collections::BTreeMap;
use std::path::PathBuf;

use awarescope::dataset::Category;
use awarescope::extract::synthetic_toy_dump;
use awarescope::labeling::{label_dataset, BandConfig, Label};
use awarescope::probe::{split, train_all_layers, SplitSpec, TrainConfig};
use awarescope::prompting::PerturbationKind;
use awarescope::report::write_csv;
use awarescope::separation::{
    labeled_rows, layer_separation, maxmin_rows, run_separation, separation_rows, LatentMatrix,
    LatentSource, Latents, Nonlinearity, SaeEncoder,
};
use awarescope::toy_model::{seeded_weights, ModelConfig};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> awarescope::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("awarescope-separation"));
    std::fs::create_dir_all(&out)?;

    // Three latents over four samples of two entity types.
    let labels = [Label::Known, Label::Forgotten, Label::Known, Label::Forgotten];
    let types = vec![Category::Player, Category::Player, Category::City, Category::City];
    #[rustfmt::skip]
    let acts = vec![
        2.0, 0.0, 0.5,
        0.0, 1.0, 0.5,
        1.5, 0.0, 0.0,
        0.0, 3.0, 0.2,
    ];
    let m = LatentMatrix::new(3, acts, &labels, types, LatentSource::Sae)?;
    let sep = layer_separation(0, &m, 2)?;
    for (cat, s) in &sep.by_type {
        println!("{cat}: s_known {:?} s_forgotten {:?}", s.s_known, s.s_forgotten);
    }
    println!("maxmin known {:?} forgotten {:?}\n", sep.maxmin_known, sep.maxmin_forgotten);

    let weights = seeded_weights(ModelConfig::default(), 0)?;
    let (_, dump) = synthetic_toy_dump(&weights, 20, 73, PerturbationKind::None)?;
    let labeled = label_dataset(&dump.records, &BandConfig::new(76, 0.3))?;
    let s = split(&labeled, &SplitSpec::default())?;
    let run = train_all_layers(&dump, &labeled, &s, &TrainConfig::default())?;
    let rows = labeled_rows(&dump, &labeled, Some(&s.test))?;

    let probes: Vec<_> = run.layers.iter().map(|r| r.params.clone()).collect();
    let probe_sep = run_separation(&dump, &rows, Latents::Probe(&probes), 1)?;
    for r in &probe_sep {
        println!("probe layer {}: maxmin known {:?} forgotten {:?}", r.layer, r.maxmin_known, r.maxmin_forgotten);
    }

    let d = dump.header.d_model;
    let n = 32;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let normal = Normal::new(0.0f32, 0.3).expect("valid std");
    let w: Vec<f32> = (0..d * n).map(|_| normal.sample(&mut rng)).collect();
    let enc = SaeEncoder::new(d, n, w, vec![0.0; n], Some(vec![0.1; n]), Nonlinearity::JumpRelu)?;
    let sae_path = out.join("sae_layer2.bin");
    std::fs::write(&sae_path, enc.to_bytes()?)?;
    let encoders = BTreeMap::from([(2usize, SaeEncoder::load(&sae_path)?)]);
    let sae_sep = run_separation(&dump, &rows, Latents::Sae(&encoders), 5)?;
    for top in &sae_sep[0].top {
        println!("sae layer 2 {:<6} top {:<9} latents {:?}", top.entity_type, top.direction, top.latents);
    }

    let mut all = probe_sep;
    all.extend(sae_sep);
    write_csv(&out.join("separation.csv"), &separation_rows(&all))?;
    write_csv(&out.join("maxmin.csv"), &maxmin_rows(&all))?;
    println!("wrote {}", out.display());
    Ok(())
}
