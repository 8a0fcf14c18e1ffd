// SPDX-License-Identifier: MIT OR Apache-2.0

use awarescope::dataset::Category;
use awarescope::labeling::{label_sample, BandConfig, Label};
use awarescope::probe::auc_roc;
use awarescope::separation::{maxmin_table, separation_scores, top_n, LatentMatrix, LatentSource};
use awarescope::store::{read_dump, write_dump, DumpHeader, LayerMatrix, RankRecord};
use proptest::prelude::*;

const V: usize = 1000;

fn band() -> impl Strategy<Value = BandConfig> {
    (1u32..600, 1u32..=5).prop_map(|(k, l)| BandConfig::new(k, l as f64 / 10.0))
        .prop_filter("bands must not overlap", |b| b.validate(V).is_ok())
}

fn labeled_latents() -> impl Strategy<Value = (usize, Vec<f64>, Vec<bool>)> {
    (1usize..6, 2usize..30).prop_flat_map(|(m, n)| {
        (Just(m), prop::collection::vec(-3.0f64..3.0, m * n), prop::collection::vec(any::<bool>(), n))
    })
}

fn latent_matrix(m: usize, acts: Vec<f64>, known: &[bool]) -> Option<LatentMatrix> {
    if !known.iter().any(|&k| k) || known.iter().all(|&k| k) {
        return None;
    }
    let labels: Vec<Label> = known.iter().map(|&k| if k { Label::Known } else { Label::Forgotten }).collect();
    LatentMatrix::new(m, acts, &labels, vec![Category::Song; known.len()], LatentSource::Sae).ok()
}

proptest! {
    #[test]
    fn label_ignores_rank_order(ranks in prop::collection::vec(1u32..=V as u32, 1..12), cfg in band(), rot in 0usize..12) {
        let a = label_sample(&ranks, V, &cfg).unwrap();
        let mut shuffled = ranks.clone();
        let r = rot % shuffled.len();
        shuffled.rotate_left(r);
        shuffled.reverse();
        let b = label_sample(&shuffled, V, &cfg).unwrap();
        prop_assert_eq!(a.label, b.label);
        prop_assert!(a.known_count + a.forgotten_count <= ranks.len());
    }

    #[test]
    fn improving_a_rank_never_loses_known(ranks in prop::collection::vec(1u32..=V as u32, 1..8), cfg in band(), i in 0usize..8) {
        let before = label_sample(&ranks, V, &cfg).unwrap();
        let mut better = ranks.clone();
        let i = i % better.len();
        better[i] = 1;
        let after = label_sample(&better, V, &cfg).unwrap();
        prop_assert!(after.known_count >= before.known_count);
        prop_assert!(after.forgotten_count <= before.forgotten_count);
        if before.label == Label::Known {
            prop_assert_eq!(after.label, Label::Known);
        }
    }

    #[test]
    fn auc_is_invariant_to_monotone_transforms(
        scores in prop::collection::vec(-5.0f64..5.0, 2..80),
        labels in prop::collection::vec(0u8..2, 80),
    ) {
        let labels = &labels[..scores.len()];
        let base = auc_roc(&scores, labels);
        let squashed: Vec<f64> = scores.iter().map(|s| (s * 0.7).tanh() * 3.0 + 1.0).collect();
        match (base, auc_roc(&squashed, labels)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (None, None) => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn flipping_labels_mirrors_auc(
        scores in prop::collection::vec(-5.0f64..5.0, 2..80),
        labels in prop::collection::vec(0u8..2, 80),
    ) {
        let labels = &labels[..scores.len()];
        let flipped: Vec<u8> = labels.iter().map(|y| 1 - y).collect();
        if let (Some(a), Some(b)) = (auc_roc(&scores, labels), auc_roc(&scores, &flipped)) {
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn separation_ignores_sample_order_and_positive_scale((m, acts, known) in labeled_latents(), scale in 0.01f64..100.0, rot in 0usize..30) {
        let Some(base) = latent_matrix(m, acts.clone(), &known) else { return Ok(()) };
        let s = separation_scores(&base).unwrap();

        let n = known.len();
        let r = rot % n;
        let order: Vec<usize> = (0..n).map(|i| (i + r) % n).collect();
        let permuted_acts: Vec<f64> = order.iter().flat_map(|&i| acts[i * m..(i + 1) * m].to_vec()).collect();
        let permuted_known: Vec<bool> = order.iter().map(|&i| known[i]).collect();
        let p = separation_scores(&latent_matrix(m, permuted_acts, &permuted_known).unwrap()).unwrap();
        prop_assert_eq!(&s, &p);

        let scaled = separation_scores(&latent_matrix(m, acts.iter().map(|a| a * scale).collect(), &known).unwrap()).unwrap();
        prop_assert_eq!(&s, &scaled);
        for (a, b) in s.s_known.iter().zip(&s.s_forgotten) {
            prop_assert_eq!(a + b, 0.0);
        }
    }

    #[test]
    fn top_n_is_sorted_with_index_tiebreak(values in prop::collection::vec((-4i32..4).prop_map(f64::from), 1..30), n in 0usize..40) {
        let top = top_n(&values, n);
        prop_assert_eq!(top.len(), n.min(values.len()));
        for w in top.windows(2) {
            let (a, b) = (values[w[0]], values[w[1]]);
            prop_assert!(a > b || (a == b && w[0] < w[1]));
        }
    }

    #[test]
    fn maxmin_never_exceeds_minmax(rows in 1usize..5, cols in 1usize..8, cells in prop::collection::vec(-1.0f64..1.0, 40)) {
        let table: Vec<&[f64]> = (0..rows).map(|r| &cells[r * cols..(r + 1) * cols]).collect();
        let (mm, j) = maxmin_table(&table).unwrap();
        let minmax = table.iter().map(|r| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).fold(f64::INFINITY, f64::min);
        prop_assert!(mm <= minmax);
        prop_assert_eq!(mm, table.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dump_round_trip(
        n in 1usize..12,
        d in 1usize..6,
        layers in 1usize..4,
        seed in any::<u32>(),
    ) {
        let records: Vec<RankRecord> = (0..n)
            .map(|i| RankRecord::new(format!("x{i}"), Category::ALL[i % 4], vec![(seed as usize + i) as u32 % 50 + 1], 50))
            .collect();
        let mats: Vec<LayerMatrix> = (0..layers)
            .map(|l| {
                let data = (0..n * d).map(|j| f32::from_bits((seed ^ (j * 2654435761 + l) as u32) & 0x3fff_ffff)).collect();
                LayerMatrix::new(l, n, d, data).unwrap()
            })
            .collect();
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("dump");
        write_dump(&DumpHeader::new("prop", layers, d, 50, n), &records, &mats, &dir).unwrap();
        let back = read_dump(&dir).unwrap();
        prop_assert_eq!(&back.records, &records);
        for (a, b) in back.layers.iter().zip(&mats) {
            prop_assert_eq!(a.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }
    }
}
