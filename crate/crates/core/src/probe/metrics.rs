// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::model::{bce_with_logit, sigmoid, ProbeParams, Samples};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Mean BCE without the weight-decay term.
    pub loss: f64,
    /// `None` when the evaluated set holds a single class.
    pub auc: Option<f64>,
    pub accuracy: f64,
    /// Majority-class frequency of the evaluated set.
    pub random_baseline: f64,
    /// `accuracy - random_baseline`.
    pub delta: f64,
    pub n: usize,
}

/// Area under the ROC curve via the Mann-Whitney rank statistic.
/// Tied scores receive their average rank, i.e. half credit per tied pair.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share their mean.
        let rank = (i + j + 2) as f64 / 2.0;
        pos_rank_sum += rank * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

pub fn scores(params: &ProbeParams, data: &Samples) -> Result<Vec<f64>> {
    if data.d != params.w.len() {
        return Err(Error::input(format!("data width {} for a probe of width {}", data.d, params.w.len())));
    }
    Ok((0..data.len())
        .map(|i| params.w.iter().zip(data.row(i)).map(|(a, b)| a * b).sum::<f64>() + params.b)
        .collect())
}

/// Metrics of a probe on `data`; a sample is predicted known when
/// `sigmoid(z) > threshold`.
pub fn evaluate(params: &ProbeParams, data: &Samples, threshold: f64) -> Result<EvalMetrics> {
    if data.is_empty() {
        return Err(Error::input("cannot evaluate on an empty set"));
    }
    let z = scores(params, data)?;
    let n = data.len();
    let loss = z.iter().zip(&data.y).map(|(&z, &y)| bce_with_logit(z, f64::from(y))).sum::<f64>() / n as f64;
    let correct = z.iter().zip(&data.y).filter(|(&z, &y)| u8::from(sigmoid(z) > threshold) == y).count();
    let accuracy = correct as f64 / n as f64;
    let pos = data.positives();
    let random_baseline = pos.max(n - pos) as f64 / n as f64;
    Ok(EvalMetrics {
        loss,
        auc: auc_roc(&z, &data.y),
        accuracy,
        random_baseline,
        delta: accuracy - random_baseline,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        assert_eq!(auc_roc(&[0.9, 0.8, 0.3], &[1, 1, 0]), Some(1.0));
        let data = Samples::new(1, vec![0.9, 0.8, 0.3], vec![1, 1, 0]).unwrap();
        // Scores as probabilities: z = logit(p) makes sigmoid(z) = p.
        let p = ProbeParams { layer: 0, w: vec![1.0], b: 0.0 };
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let data = Samples { x: data.x.iter().map(|&v| logit(v)).collect(), ..data };
        let m = evaluate(&p, &data, 0.5).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!((m.random_baseline - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.delta, m.accuracy - m.random_baseline);
    }

    #[test]
    fn ties_get_half_credit() {
        assert_eq!(auc_roc(&[0.5, 0.5], &[1, 0]), Some(0.5));
        assert_eq!(auc_roc(&[0.1, 0.5, 0.5, 0.9], &[0, 1, 0, 1]), Some(0.875));
    }

    #[test]
    fn single_class_has_no_auc() {
        assert_eq!(auc_roc(&[0.1, 0.2], &[1, 1]), None);
        let p = ProbeParams { layer: 0, w: vec![1.0], b: 0.0 };
        let m = evaluate(&p, &Samples::new(1, vec![1.0, 2.0], vec![1, 1]).unwrap(), 0.5).unwrap();
        assert_eq!(m.auc, None);
        assert_eq!(m.random_baseline, 1.0);
    }
}
