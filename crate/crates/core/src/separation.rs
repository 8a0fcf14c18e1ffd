// SPDX-License-Identifier: MIT OR Apache-2.0

//! Positive-activation fractions and known/forgotten separation scores.
//!
//! Activations are probe logits (one latent) or SAE latents. For each latent,
//! `g` is the share of a class's rows with activation strictly above zero and
//! `s_known = g_known - g_forgotten`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Category;
use crate::error::{Error, Result};
use crate::labeling::{Label, LabeledDataset};
use crate::probe::ProbeParams;
use crate::store::{LayerMatrix, LayerSource};
use crate::tensors::{self, NamedTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentSource {
    Probe,
    Sae,
}

impl fmt::Display for LatentSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            LatentSource::Probe => "probe",
            LatentSource::Sae => "sae",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Known,
    Forgotten,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Known, Direction::Forgotten];
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Direction::Known => "known",
            Direction::Forgotten => "forgotten",
        })
    }
}

/// Row-major `n_samples x n_latents` activations with a class and entity type per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMatrix {
    pub n_latents: usize,
    pub activations: Vec<f64>,
    /// `true` for known rows, `false` for forgotten rows.
    pub known: Vec<bool>,
    pub entity_types: Vec<Category>,
    pub source: LatentSource,
}

impl LatentMatrix {
    pub fn new(
        n_latents: usize,
        activations: Vec<f64>,
        labels: &[Label],
        entity_types: Vec<Category>,
        source: LatentSource,
    ) -> Result<Self> {
        if n_latents == 0 || activations.len() != n_latents * labels.len() || entity_types.len() != labels.len() {
            return Err(Error::input(format!(
                "{} activations, {} labels and {} entity types do not fit {n_latents} latents",
                activations.len(),
                labels.len(),
                entity_types.len()
            )));
        }
        if source == LatentSource::Probe && n_latents != 1 {
            return Err(Error::input("probe activations have exactly one latent"));
        }
        let known = labels
            .iter()
            .map(|l| match l {
                Label::Known => Ok(true),
                Label::Forgotten => Ok(false),
                Label::Excluded => Err(Error::input("excluded rows cannot enter a latent matrix")),
            })
            .collect::<Result<_>>()?;
        Ok(Self { n_latents, activations, known, entity_types, source })
    }

    pub fn n_samples(&self) -> usize {
        self.known.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.activations[i * self.n_latents..(i + 1) * self.n_latents]
    }

    /// The rows of one entity type.
    pub fn subset(&self, entity_type: Category) -> Self {
        let rows: Vec<usize> = (0..self.n_samples()).filter(|&i| self.entity_types[i] == entity_type).collect();
        Self {
            n_latents: self.n_latents,
            activations: rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            known: rows.iter().map(|&i| self.known[i]).collect(),
            entity_types: vec![entity_type; rows.len()],
            source: self.source,
        }
    }

    pub fn has_both_classes(&self) -> bool {
        self.known.iter().any(|&k| k) && self.known.iter().any(|&k| !k)
    }
}

pub fn positive_fractions(m: &LatentMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n_known = m.known.iter().filter(|&&k| k).count();
    let n_forgotten = m.n_samples() - n_known;
    if n_known == 0 || n_forgotten == 0 {
        return Err(Error::input(format!(
            "separation needs both classes ({n_known} known, {n_forgotten} forgotten)"
        )));
    }
    let mut pk = vec![0usize; m.n_latents];
    let mut pf = vec![0usize; m.n_latents];
    for i in 0..m.n_samples() {
        let counts = if m.known[i] { &mut pk } else { &mut pf };
        for (c, &a) in counts.iter_mut().zip(m.row(i)) {
            *c += usize::from(a > 0.0);
        }
    }
    let frac = |c: Vec<usize>, n: usize| c.into_iter().map(|c| c as f64 / n as f64).collect();
    Ok((frac(pk, n_known), frac(pf, n_forgotten)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationScores {
    pub g_known: Vec<f64>,
    pub g_forgotten: Vec<f64>,
    pub s_known: Vec<f64>,
    pub s_forgotten: Vec<f64>,
}

impl SeparationScores {
    pub fn from_fractions(g_known: Vec<f64>, g_forgotten: Vec<f64>) -> Self {
        let s_known: Vec<f64> = g_known.iter().zip(&g_forgotten).map(|(k, f)| k - f).collect();
        // Exact negation keeps the pair antisymmetric; `0.0 - s` avoids a negative zero.
        let s_forgotten = s_known.iter().map(|s| 0.0 - s).collect();
        Self { g_known, g_forgotten, s_known, s_forgotten }
    }

    pub fn scores(&self, direction: Direction) -> &[f64] {
        match direction {
            Direction::Known => &self.s_known,
            Direction::Forgotten => &self.s_forgotten,
        }
    }

    pub fn n_latents(&self) -> usize {
        self.s_known.len()
    }
}

pub fn separation_scores(m: &LatentMatrix) -> Result<SeparationScores> {
    let (gk, gf) = positive_fractions(m)?;
    Ok(SeparationScores::from_fractions(gk, gf))
}

/// Indices of the `n` largest values, ties by ascending index; `n` is clamped.
pub fn top_n(values: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(n.min(values.len()));
    idx
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopLatents {
    pub direction: Direction,
    pub entity_type: Category,
    pub latents: Vec<usize>,
}

pub fn top_latents(by_type: &BTreeMap<Category, SeparationScores>, n: usize) -> Vec<TopLatents> {
    Direction::BOTH
        .iter()
        .flat_map(|&direction| {
            by_type.iter().map(move |(&entity_type, s)| TopLatents {
                direction,
                entity_type,
                latents: top_n(s.scores(direction), n),
            })
        })
        .collect()
}

/// `max_j min_t table[t][j]` and the maximizing `j` (lowest on ties).
pub fn maxmin_table(table: &[&[f64]]) -> Result<(f64, usize)> {
    let width = table.first().map(|r| r.len()).filter(|&w| w > 0).ok_or_else(|| Error::input("empty score table"))?;
    if table.iter().any(|r| r.len() != width) {
        return Err(Error::input("entity types disagree on latent count"));
    }
    let mins: Vec<f64> = (0..width).map(|j| table.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min)).collect();
    let j = top_n(&mins, 1)[0];
    Ok((mins[j], j))
}

pub fn maxmin(by_type: &BTreeMap<Category, SeparationScores>, direction: Direction) -> Result<(f64, usize)> {
    let table: Vec<&[f64]> = by_type.values().map(|s| s.scores(direction)).collect();
    maxmin_table(&table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Relu,
    JumpRelu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaeEncoder {
    pub d_model: usize,
    pub n_latents: usize,
    /// Row-major `d_model x n_latents`.
    pub w_enc: Vec<f32>,
    pub b_enc: Vec<f32>,
    pub threshold: Option<Vec<f32>>,
    pub nonlinearity: Nonlinearity,
}

impl SaeEncoder {
    pub fn new(
        d_model: usize,
        n_latents: usize,
        w_enc: Vec<f32>,
        b_enc: Vec<f32>,
        threshold: Option<Vec<f32>>,
        nonlinearity: Nonlinearity,
    ) -> Result<Self> {
        if w_enc.len() != d_model * n_latents || b_enc.len() != n_latents {
            return Err(Error::input(format!("SAE tensors do not match {d_model} x {n_latents}")));
        }
        match (&threshold, nonlinearity) {
            (Some(t), Nonlinearity::JumpRelu) if t.len() == n_latents => {}
            (None, Nonlinearity::Relu) => {}
            _ => return Err(Error::input("a threshold vector is required for jump_relu and only for it")),
        }
        Ok(Self { d_model, n_latents, w_enc, b_enc, threshold, nonlinearity })
    }

    /// Loads `W_enc` `[d_model, n_latents]`, `b_enc` and an optional
    /// `threshold` from a tensor container. A threshold selects JumpReLU.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (_, list) = tensors::decode(bytes)?;
        let mut by_name: HashMap<String, NamedTensor> = list.into_iter().map(|t| (t.name.clone(), t)).collect();
        let w = by_name.remove("W_enc").ok_or_else(|| Error::input("SAE container lacks W_enc"))?;
        let [d, n] = w.shape[..] else {
            return Err(Error::input(format!("W_enc has shape {:?}, expected two dimensions", w.shape)));
        };
        let b = by_name.remove("b_enc").ok_or_else(|| Error::input("SAE container lacks b_enc"))?;
        let t = by_name.remove("threshold").map(|t| t.data);
        let kind = if t.is_some() { Nonlinearity::JumpRelu } else { Nonlinearity::Relu };
        Self::new(d, n, w.data, b.data, t, kind)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut list = vec![
            NamedTensor { name: "W_enc".into(), shape: vec![self.d_model, self.n_latents], data: self.w_enc.clone() },
            NamedTensor { name: "b_enc".into(), shape: vec![self.n_latents], data: self.b_enc.clone() },
        ];
        if let Some(t) = &self.threshold {
            list.push(NamedTensor { name: "threshold".into(), shape: vec![self.n_latents], data: t.clone() });
        }
        tensors::encode(serde_json::Map::new(), &list)
    }

    /// Encodes one residual vector.
    pub fn encode(&self, x: &[f32]) -> Result<Vec<f64>> {
        if x.len() != self.d_model {
            return Err(Error::input(format!("input width {} for an SAE of width {}", x.len(), self.d_model)));
        }
        let mut z: Vec<f64> = self.b_enc.iter().map(|&b| f64::from(b)).collect();
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.w_enc[i * self.n_latents..(i + 1) * self.n_latents];
            for (zj, &w) in z.iter_mut().zip(row) {
                *zj += f64::from(w) * f64::from(xi);
            }
        }
        match (&self.threshold, self.nonlinearity) {
            (Some(t), Nonlinearity::JumpRelu) => {
                for (zj, &th) in z.iter_mut().zip(t) {
                    if *zj <= f64::from(th) {
                        *zj = 0.0;
                    }
                }
            }
            _ => z.iter_mut().for_each(|v| *v = v.max(0.0)),
        }
        Ok(z)
    }
}

/// Dump rows with known/forgotten labels and entity types.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRows {
    pub rows: Vec<usize>,
    pub labels: Vec<Label>,
    pub entity_types: Vec<Category>,
}

/// Selects the non-excluded samples among `ids` (all samples when `None`).
pub fn labeled_rows(source: &dyn LayerSource, labels: &LabeledDataset, ids: Option<&[String]>) -> Result<LabeledRows> {
    let label_of: HashMap<&str, Label> = labels.labels.iter().map(|s| (s.sample_id.as_str(), s.label)).collect();
    let wanted: Option<std::collections::HashSet<&str>> = ids.map(|ids| ids.iter().map(String::as_str).collect());
    let mut out = LabeledRows { rows: vec![], labels: vec![], entity_types: vec![] };
    for (i, r) in source.records().iter().enumerate() {
        if wanted.as_ref().is_some_and(|w| !w.contains(r.sample_id.as_str())) {
            continue;
        }
        let label = *label_of
            .get(r.sample_id.as_str())
            .ok_or_else(|| Error::consistency(format!("{} has no label", r.sample_id)))?;
        if label != Label::Excluded {
            out.rows.push(i);
            out.labels.push(label);
            out.entity_types.push(r.category);
        }
    }
    Ok(out)
}

pub fn probe_latents(params: &ProbeParams, matrix: &LayerMatrix, rows: &LabeledRows) -> Result<LatentMatrix> {
    if params.w.len() != matrix.d_model {
        return Err(Error::input(format!("probe width {} for d_model {}", params.w.len(), matrix.d_model)));
    }
    let z = rows
        .rows
        .iter()
        .map(|&r| params.w.iter().zip(matrix.row(r)).map(|(w, &x)| w * f64::from(x)).sum::<f64>() + params.b)
        .collect();
    LatentMatrix::new(1, z, &rows.labels, rows.entity_types.clone(), LatentSource::Probe)
}

pub fn sae_encode(encoder: &SaeEncoder, matrix: &LayerMatrix, rows: &LabeledRows) -> Result<LatentMatrix> {
    let mut acts = Vec::with_capacity(rows.rows.len() * encoder.n_latents);
    for &r in &rows.rows {
        acts.extend(encoder.encode(matrix.row(r))?);
    }
    LatentMatrix::new(encoder.n_latents, acts, &rows.labels, rows.entity_types.clone(), LatentSource::Sae)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSeparation {
    pub layer: usize,
    pub source: LatentSource,
    pub by_type: BTreeMap<Category, SeparationScores>,
    pub top: Vec<TopLatents>,
    /// `(value, latent)` per direction; `None` when no entity type has both classes.
    pub maxmin_known: Option<(f64, usize)>,
    pub maxmin_forgotten: Option<(f64, usize)>,
}

/// Scores per entity type; types missing a class are skipped.
pub fn layer_separation(layer: usize, m: &LatentMatrix, n_top: usize) -> Result<LayerSeparation> {
    let mut types: Vec<Category> = m.entity_types.clone();
    types.sort();
    types.dedup();
    let mut by_type = BTreeMap::new();
    for t in types {
        let sub = m.subset(t);
        if sub.has_both_classes() {
            by_type.insert(t, separation_scores(&sub)?);
        }
    }
    let (mk, mf) = if by_type.is_empty() {
        (None, None)
    } else {
        (Some(maxmin(&by_type, Direction::Known)?), Some(maxmin(&by_type, Direction::Forgotten)?))
    };
    Ok(LayerSeparation {
        layer,
        source: m.source,
        top: top_latents(&by_type, n_top),
        by_type,
        maxmin_known: mk,
        maxmin_forgotten: mf,
    })
}

/// Where the latents of each layer come from.
pub enum Latents<'a> {
    Probe(&'a [ProbeParams]),
    /// One encoder per listed layer.
    Sae(&'a BTreeMap<usize, SaeEncoder>),
}

pub fn run_separation(
    source: &dyn LayerSource,
    rows: &LabeledRows,
    latents: Latents<'_>,
    n_top: usize,
) -> Result<Vec<LayerSeparation>> {
    match latents {
        Latents::Probe(probes) => probes
            .iter()
            .map(|p| {
                let matrix = source.layer(p.layer)?;
                layer_separation(p.layer, &probe_latents(p, &matrix, rows)?, n_top)
            })
            .collect(),
        Latents::Sae(encoders) => encoders
            .iter()
            .map(|(&l, enc)| {
                let matrix = source.layer(l)?;
                layer_separation(l, &sae_encode(enc, &matrix, rows)?, n_top)
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationRow {
    pub layer: usize,
    pub source: LatentSource,
    pub entity_type: Category,
    pub direction: Direction,
    pub latent: usize,
    pub g_known: f64,
    pub g_forgotten: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMinRow {
    pub layer: usize,
    pub direction: Direction,
    pub value: f64,
    pub latent: usize,
}

/// One row per selected top latent.
pub fn separation_rows(results: &[LayerSeparation]) -> Vec<SeparationRow> {
    let mut rows = Vec::new();
    for r in results {
        for top in &r.top {
            let s = &r.by_type[&top.entity_type];
            for &j in &top.latents {
                rows.push(SeparationRow {
                    layer: r.layer,
                    source: r.source,
                    entity_type: top.entity_type,
                    direction: top.direction,
                    latent: j,
                    g_known: s.g_known[j],
                    g_forgotten: s.g_forgotten[j],
                    s: s.scores(top.direction)[j],
                });
            }
        }
    }
    rows
}

pub fn maxmin_rows(results: &[LayerSeparation]) -> Vec<MaxMinRow> {
    let mut rows = Vec::new();
    for r in results {
        for (direction, mm) in [(Direction::Known, r.maxmin_known), (Direction::Forgotten, r.maxmin_forgotten)] {
            if let Some((value, latent)) = mm {
                rows.push(MaxMinRow { layer: r.layer, direction, value, latent });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(acts: &[f64], labels: &[Label]) -> LatentMatrix {
        let n = acts.len() / labels.len();
        LatentMatrix::new(n, acts.to_vec(), labels, vec![Category::City; labels.len()], LatentSource::Sae).unwrap()
    }

    #[test]
    fn fractions_and_scores() {
        use Label::*;
        let m = matrix(&[1.0, -0.5, 2.0, 3.0, 0.0, -1.0], &[Known, Known, Known, Forgotten, Forgotten, Forgotten]);
        let (gk, gf) = positive_fractions(&m).unwrap();
        assert_eq!((gk[0], gf[0]), (2.0 / 3.0, 1.0 / 3.0));
        let s = separation_scores(&m).unwrap();
        assert!((s.s_known[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.s_known[0] + s.s_forgotten[0], 0.0);
    }

    #[test]
    fn zero_is_not_positive() {
        let m = matrix(&[0.0, 0.0], &[Label::Known, Label::Forgotten]);
        assert_eq!(positive_fractions(&m).unwrap(), (vec![0.0], vec![0.0]));
        let m = matrix(&[0.1, -1.0], &[Label::Known, Label::Forgotten]);
        assert_eq!(positive_fractions(&m).unwrap().0, vec![1.0]);
        assert!(positive_fractions(&matrix(&[1.0], &[Label::Known])).is_err());
    }

    #[test]
    fn top_and_ties() {
        assert_eq!(top_n(&[0.1, 0.9, 0.5], 2), vec![1, 2]);
        assert_eq!(top_n(&[0.5, 0.5], 1), vec![0]);
        assert_eq!(top_n(&[0.3], 5), vec![0]);
    }

    #[test]
    fn maxmin_two_step() {
        let t1 = [0.5, 0.2];
        let t2 = [0.4, 0.6];
        assert_eq!(maxmin_table(&[&t1, &t2]).unwrap(), (0.4, 0));
        assert_eq!(maxmin_table(&[&t2]).unwrap(), (0.6, 1));
        assert_eq!(maxmin_table(&[&[0.2, 0.2], &[0.2, 0.2]]).unwrap(), (0.2, 0));
    }

    #[test]
    fn sae_nonlinearities() {
        let relu = SaeEncoder::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], None, Nonlinearity::Relu).unwrap();
        assert_eq!(relu.encode(&[1.0, -2.0]).unwrap(), vec![1.0, 0.0]);
        let jump = SaeEncoder::new(
            2,
            2,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0],
            Some(vec![1.5, 0.0]),
            Nonlinearity::JumpRelu,
        )
        .unwrap();
        assert_eq!(jump.encode(&[1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
        let bias_only = SaeEncoder::new(2, 2, vec![0.0; 4], vec![0.5, 2.0], None, Nonlinearity::Relu).unwrap();
        assert_eq!(bias_only.encode(&[7.0, -3.0]).unwrap(), bias_only.encode(&[0.0, 1.0]).unwrap());
        assert!(relu.encode(&[1.0]).is_err());
        assert!(SaeEncoder::new(2, 2, vec![0.0; 4], vec![0.0; 2], None, Nonlinearity::JumpRelu).is_err());
    }

    #[test]
    fn sae_container_round_trip() {
        let enc = SaeEncoder::new(1, 2, vec![1.0, -1.0], vec![0.0, 0.5], Some(vec![0.1, 0.2]), Nonlinearity::JumpRelu)
            .unwrap();
        assert_eq!(SaeEncoder::from_bytes(&enc.to_bytes().unwrap()).unwrap(), enc);
    }
}
