// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use awarescope::analysis::{checkpoint_curve, checkpoint_rows, kl_sweep, perturbation_eval, sweep_rows, SweepGrid};
use awarescope::dataset::Category;
use awarescope::labeling::{label_dataset, BandConfig};
use awarescope::probe::{split, train_all_layers, SplitSpec, TrainConfig};
use awarescope::prompting::PerturbationKind;
use awarescope::store::{Dump, DumpHeader, LayerMatrix, LayerSource, RankRecord};
use awarescope::Error;

const V: usize = 100;

/// Ranks cycle through the known band, the gap and the forgotten band;
/// activations shift with the label so probes have something to find.
fn dump(n: usize, d: usize, n_layers: usize, salt: u32) -> Dump {
    let records: Vec<RankRecord> = (0..n)
        .map(|i| {
            let rank = [1, 95, 3, 50, 99, 2][(i + salt as usize) % 6];
            RankRecord::new(format!("d{i:03}"), Category::ALL[i % 4], vec![rank], V)
        })
        .collect();
    let layers = (0..n_layers)
        .map(|l| {
            let data = (0..n * d)
                .map(|j| {
                    let row = j / d;
                    let known = records[row].ranks[0] <= 3;
                    let noise = ((j as u32).wrapping_mul(2654435761).wrapping_add(salt + l as u32) % 1000) as f32 / 1000.0 - 0.5;
                    noise + if known { 1.0 } else { -1.0 }
                })
                .collect();
            LayerMatrix::new(l, n, d, data).unwrap()
        })
        .collect();
    Dump { header: DumpHeader::new("analysis", n_layers, d, V, n), records, layers }
}

#[test]
fn checkpoint_curve_keeps_input_order_and_shape() {
    let dumps = [dump(120, 4, 3, 0), dump(120, 4, 3, 1), dump(120, 4, 3, 2)];
    let steps = [4000u64, 0, 1000];
    let inputs: Vec<(u64, &dyn LayerSource)> = steps.iter().zip(&dumps).map(|(&s, d)| (s, d as &dyn LayerSource)).collect();
    let curve = checkpoint_curve(&inputs, &BandConfig::new(3, 0.3), &SplitSpec::default(), &TrainConfig::default()).unwrap();
    assert_eq!(curve.steps, steps);
    assert_eq!(curve.n_layers, 3);
    assert_eq!(curve.test_accuracy.len(), 3);
    assert!(curve.test_accuracy.iter().chain(&curve.train_accuracy).all(|row| row.len() == 3));
    assert!(curve.test_baseline.iter().all(|b| (0.5..=1.0).contains(b)));

    let rows = checkpoint_rows(&curve);
    assert_eq!(rows.len(), 9);
    assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), [4000, 4000, 4000, 0, 0, 0, 1000, 1000, 1000]);
    for r in &rows {
        assert!((r.test_delta - (r.test_acc - r.baseline)).abs() < 1e-15);
    }
}

#[test]
fn checkpoint_curve_needs_two_matching_steps() {
    let a = dump(60, 4, 2, 0);
    let b = dump(60, 4, 3, 0);
    let band = BandConfig::new(3, 0.3);
    let one: Vec<(u64, &dyn LayerSource)> = vec![(0, &a)];
    assert!(matches!(checkpoint_curve(&one, &band, &SplitSpec::default(), &TrainConfig::default()), Err(Error::Input(_))));
    let mixed: Vec<(u64, &dyn LayerSource)> = vec![(0, &a), (1, &b)];
    assert!(matches!(
        checkpoint_curve(&mixed, &band, &SplitSpec::default(), &TrainConfig::default()),
        Err(Error::Consistency(_))
    ));
}

#[test]
fn sweep_covers_the_grid_and_flags_overlaps() {
    let d = dump(120, 4, 2, 0);
    // V=100, l=0.3 puts the forgotten band above rank 70, so k=80 overlaps.
    let grid = SweepGrid { k: vec![1, 3, 80], l: vec![0.1, 0.3] };
    let cells = kl_sweep(&d, &grid, &SplitSpec::default(), &TrainConfig::default(), Some(&[1])).unwrap();
    assert_eq!(cells.len(), 6);
    assert_eq!(cells.iter().map(|c| (c.k, c.l)).collect::<Vec<_>>(), [(1, 0.1), (3, 0.1), (80, 0.1), (1, 0.3), (3, 0.3), (80, 0.3)]);
    let invalid = cells.iter().find(|c| c.k == 80 && c.l == 0.3).unwrap();
    assert!(!invalid.valid && invalid.test_delta.is_none());
    let trained = cells.iter().find(|c| c.k == 3 && c.l == 0.3).unwrap();
    assert_eq!(trained.best_layer, Some(1));
    assert!(trained.n_known > cells[3].n_known, "k=3 admits more known samples than k=1");
    assert_eq!(sweep_rows(&cells).len(), 6);
    assert!(SweepGrid { k: vec![5, 1], l: vec![0.3] }.validate().is_err());
}

#[test]
fn robustness_requires_every_variant() {
    let base = dump(90, 4, 2, 0);
    let labeled = label_dataset(&base.records, &BandConfig::new(3, 0.3)).unwrap();
    let s = split(&labeled, &SplitSpec::default()).unwrap();
    let run = train_all_layers(&base, &labeled, &s, &TrainConfig::default()).unwrap();

    let variants: BTreeMap<PerturbationKind, &dyn LayerSource> =
        PerturbationKind::ALL[1..].iter().map(|&k| (k, &base as &dyn LayerSource)).collect();
    let report = perturbation_eval(&run, &base, &labeled, &s, &variants).unwrap();
    assert_eq!(report.rows.len(), 7);
    // Same activations everywhere, so every row matches the unperturbed one.
    assert!(report.rows.iter().all(|r| r.test == report.rows[0].test));

    let mut partial = variants.clone();
    partial.remove(&PerturbationKind::RandomSentence);
    assert!(matches!(perturbation_eval(&run, &base, &labeled, &s, &partial), Err(Error::Consistency(_))));

    // A variant with a different sample order cannot be scored against base labels.
    let shuffled = dump(90, 4, 2, 1);
    let mut reordered = variants;
    let mut renamed = shuffled.clone();
    renamed.records.reverse();
    reordered.insert(PerturbationKind::QuoteSingle, &renamed);
    assert!(perturbation_eval(&run, &base, &labeled, &s, &reordered).is_err());
}
