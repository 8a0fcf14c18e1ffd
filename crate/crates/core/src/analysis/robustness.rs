// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::LabeledDataset;
use crate::probe::{aggregate, evaluate, select_rows, Aggregate, EvalMetrics, ProbeRun, Split};
use crate::prompting::PerturbationKind;
use crate::store::LayerSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub perturbation: PerturbationKind,
    /// Test metrics across layers.
    pub test: Aggregate,
    pub per_layer: Vec<EvalMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    /// Training metrics of the frozen probes, shared by every row.
    pub train: Aggregate,
    pub rows: Vec<RobustnessRow>,
}

fn check_alignment(base: &dyn LayerSource, variant: &dyn LayerSource, kind: PerturbationKind) -> Result<()> {
    let (b, v) = (base.header(), variant.header());
    if (b.n_layers, b.d_model) != (v.n_layers, v.d_model) {
        return Err(Error::consistency(format!(
            "{kind} dump has {} layers x {}, base has {} x {}",
            v.n_layers, v.d_model, b.n_layers, b.d_model
        )));
    }
    let same = base.records().len() == variant.records().len()
        && base.records().iter().zip(variant.records()).all(|(a, b)| a.sample_id == b.sample_id);
    if !same {
        return Err(Error::consistency(format!("{kind} dump does not list the base sample ids in order")));
    }
    Ok(())
}

/// Evaluates frozen probes on the test rows of each variant dump.
///
/// Labels come from the unperturbed dump, so every row scores the same
/// targets. A missing `None` variant falls back to the base dump. The report
/// always has one row per perturbation kind.
pub fn perturbation_eval(
    probes: &ProbeRun,
    base: &dyn LayerSource,
    labels: &LabeledDataset,
    split: &Split,
    variants: &BTreeMap<PerturbationKind, &dyn LayerSource>,
) -> Result<RobustnessReport> {
    let test = select_rows(base, labels, &split.test)?;
    let mut rows = Vec::with_capacity(PerturbationKind::ALL.len());
    for kind in PerturbationKind::ALL {
        let source: &dyn LayerSource = match variants.get(&kind) {
            Some(&s) => s,
            None if kind == PerturbationKind::None => base,
            None => return Err(Error::consistency(format!("no dump for perturbation {kind}"))),
        };
        check_alignment(base, source, kind)?;
        let per_layer = probes
            .layers
            .iter()
            .map(|r| {
                let matrix = source.layer(r.params.layer)?;
                evaluate(&r.params, &test.samples(&matrix)?, probes.config.threshold)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(RobustnessRow { perturbation: kind, test: aggregate(&per_layer), per_layer });
    }
    Ok(RobustnessReport { train: probes.train_aggregate, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCsvRow {
    /// `shared` for the training block.
    pub modification: String,
    pub subset: String,
    pub loss: f64,
    pub loss_std: f64,
    pub auc: Option<f64>,
    pub auc_std: Option<f64>,
    pub acc: f64,
    pub acc_std: f64,
}

impl RobustnessCsvRow {
    fn new(modification: String, subset: &str, a: &Aggregate) -> Self {
        Self {
            modification,
            subset: subset.into(),
            loss: a.mean.loss,
            loss_std: a.std.loss,
            auc: a.mean.auc,
            auc_std: a.std.auc,
            acc: a.mean.accuracy,
            acc_std: a.std.accuracy,
        }
    }
}

/// One shared train row followed by one test row per perturbation.
pub fn robustness_rows(report: &RobustnessReport) -> Vec<RobustnessCsvRow> {
    std::iter::once(RobustnessCsvRow::new("shared".into(), "train", &report.train))
        .chain(report.rows.iter().map(|r| RobustnessCsvRow::new(r.perturbation.to_string(), "test", &r.test)))
        .collect()
}
