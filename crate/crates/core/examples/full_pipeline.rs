// SPDX-License-Identifier: MIT OR Apache-2.0
//! End to end on the toy model: synthetic facts, prompts, extraction, labels,
//! probes, separation, a small sweep and the robustness table, finishing with
//! a report directory of CSV files and SVG charts.
//!
//! Every step is deterministic, so two runs with the same arguments write
//! identical files.
//!
//! Usage:
//!   cargo run --release --example full_pipeline -- [OUT_DIR] [ENTITIES_PER_CATEGORY]

use std::collections::BTreeMap;
use std::path::PathBuf;

use awarescope::analysis::{kl_sweep, perturbation_eval, SweepGrid};
use awarescope::dataset::{synthetic_facts, write_facts};
use awarescope::extract::extract_toy;
use awarescope::labeling::{label_dataset, write_labels, write_summary, BandConfig};
use awarescope::probe::{split, train_all_layers, write_probes, SplitSpec, TrainConfig};
use awarescope::prompting::{render_all, write_prompts, PerturbationKind, TemplateId, TemplateSet};
use awarescope::report::{emit_report, ReportInputs};
use awarescope::separation::{labeled_rows, run_separation, Latents};
use awarescope::store::{write_dump, DumpDir, LayerSource};
use awarescope::toy_model::{seeded_weights, ModelConfig};

fn main() -> awarescope::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("awarescope-pipeline"));
    let per_cat: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let seed = 73;
    std::fs::create_dir_all(&out)?;

    let facts = synthetic_facts(per_cat, seed);
    write_facts(&out.join("facts.jsonl"), &facts)?;
    let templates = TemplateSet::shipped(TemplateId::Template2Balanced);
    let weights = seeded_weights(ModelConfig::default(), 0)?;

    let mut dumps = BTreeMap::new();
    for kind in PerturbationKind::ALL {
        let prompts = render_all(&facts, &templates, kind, seed)?;
        write_prompts(&out.join(format!("prompts_{kind}.jsonl")), &prompts)?;
        let dump = extract_toy(&weights, &prompts, &facts, None)?;
        let dir = out.join(format!("dump_{kind}"));
        write_dump(&dump.header, &dump.records, &dump.layers, &dir)?;
        dumps.insert(kind, DumpDir::open(&dir)?);
    }
    let base = &dumps[&PerturbationKind::None];
    println!("extracted {} facts under {} perturbations", facts.len(), dumps.len());

    let band = BandConfig::new(76, 0.3);
    let labeled = label_dataset(base.records(), &band)?;
    write_labels(&out.join("labels.jsonl"), &labeled)?;
    write_summary(&out.join("label_summary.json"), &labeled)?;
    println!("known {} forgotten {} excluded {}", labeled.totals.known, labeled.totals.forgotten, labeled.totals.excluded);

    let s = split(&labeled, &SplitSpec::default())?;
    let cfg = TrainConfig::default();
    let run = train_all_layers(base, &labeled, &s, &cfg)?;
    write_probes(&out.join("probes.json"), &run)?;
    let best = run.best_layer();
    println!("best layer {} test acc {:.3} (baseline {:.3})", best.params.layer, best.test.accuracy, best.test.random_baseline);

    let rows = labeled_rows(base, &labeled, Some(&s.test))?;
    let probes: Vec<_> = run.layers.iter().map(|r| r.params.clone()).collect();
    let separation = run_separation(base, &rows, Latents::Probe(&probes), 1)?;

    let grid = SweepGrid { k: vec![10, 50, 76], l: vec![0.2, 0.3] };
    let sweep = kl_sweep(base, &grid, &SplitSpec::default(), &cfg, None)?;

    let variants: BTreeMap<PerturbationKind, &dyn LayerSource> =
        dumps.iter().map(|(k, d)| (*k, d as &dyn LayerSource)).collect();
    let robustness = perturbation_eval(&run, base, &labeled, &s, &variants)?;

    let inputs = ReportInputs {
        probes: Some(run),
        separation: Some(separation),
        sweep: Some(sweep),
        robustness: Some(robustness),
        checkpoints: None,
    };
    for path in emit_report(&inputs, &out.join("report"), true)? {
        println!("  {}", path.display());
    }
    Ok(())
}
