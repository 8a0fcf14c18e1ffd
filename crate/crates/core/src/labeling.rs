// SPDX-License-Identifier: MIT OR Apache-2.0

//! Known / forgotten labels from teacher-forced gold-token ranks.
//!
//! A gold token is in the known band when its rank is at most `k` and in the
//! forgotten band when it sits in the bottom `l` fraction of the vocabulary.
//! A sample takes the label of the band holding the majority of its gold
//! tokens; ties are excluded.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Category;
use crate::error::{Error, Result};
use crate::store::RankRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    pub k: u32,
    pub l: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self { k: 500, l: 0.3 }
    }
}

impl BandConfig {
    pub fn new(k: u32, l: f64) -> Self {
        Self { k, l }
    }

    /// Ranks strictly above this value are in the forgotten band.
    pub fn forgotten_threshold(&self, vocab_size: usize) -> u64 {
        // The epsilon keeps e.g. 0.7 * 1000 = 700.0000000000001 from rounding up.
        ((1.0 - self.l) * vocab_size as f64 - 1e-9).ceil().max(0.0) as u64
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        if self.k < 1 {
            return Err(Error::config("k must be at least 1"));
        }
        if !(self.l > 0.0 && self.l < 1.0) {
            return Err(Error::config(format!("l = {} must lie strictly between 0 and 1", self.l)));
        }
        let threshold = self.forgotten_threshold(vocab_size);
        if u64::from(self.k) >= threshold {
            return Err(Error::config(format!(
                "bands overlap: k = {} must be below ceil((1 - l) * V) = {threshold} for l = {}, V = {vocab_size}",
                self.k, self.l
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    KnownBand,
    ForgottenBand,
    Neither,
}

pub fn band_of(rank: u32, vocab_size: usize, cfg: &BandConfig) -> Result<Band> {
    cfg.validate(vocab_size)?;
    if rank == 0 || rank as usize > vocab_size {
        return Err(Error::input(format!("rank {rank} outside 1..={vocab_size}")));
    }
    Ok(band_unchecked(rank, cfg.k, cfg.forgotten_threshold(vocab_size)))
}

fn band_unchecked(rank: u32, k: u32, threshold: u64) -> Band {
    if rank <= k {
        Band::KnownBand
    } else if u64::from(rank) > threshold {
        Band::ForgottenBand
    } else {
        Band::Neither
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Known,
    Forgotten,
    Excluded,
}

impl Label {
    /// Probe target: known = 1, forgotten = 0.
    pub fn target(self) -> Option<u8> {
        match self {
            Label::Known => Some(1),
            Label::Forgotten => Some(0),
            Label::Excluded => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleLabel {
    pub sample_id: String,
    pub category: Category,
    pub label: Label,
    pub known_count: usize,
    pub forgotten_count: usize,
}

fn count_bands(ranks: &[u32], vocab_size: usize, cfg: &BandConfig) -> Result<(usize, usize)> {
    if ranks.is_empty() {
        return Err(Error::input("a sample needs at least one gold-token rank"));
    }
    let threshold = cfg.forgotten_threshold(vocab_size);
    let (mut known, mut forgotten) = (0, 0);
    for &r in ranks {
        if r == 0 || r as usize > vocab_size {
            return Err(Error::input(format!("rank {r} outside 1..={vocab_size}")));
        }
        match band_unchecked(r, cfg.k, threshold) {
            Band::KnownBand => known += 1,
            Band::ForgottenBand => forgotten += 1,
            Band::Neither => {}
        }
    }
    Ok((known, forgotten))
}

fn majority(known: usize, forgotten: usize) -> Label {
    match known.cmp(&forgotten) {
        std::cmp::Ordering::Greater => Label::Known,
        std::cmp::Ordering::Less => Label::Forgotten,
        std::cmp::Ordering::Equal => Label::Excluded,
    }
}

/// Labels one rank sequence. The returned label carries an empty sample id
/// and the player category; [`label_dataset`] fills both from the record.
pub fn label_sample(ranks: &[u32], vocab_size: usize, cfg: &BandConfig) -> Result<SampleLabel> {
    cfg.validate(vocab_size)?;
    let (known_count, forgotten_count) = count_bands(ranks, vocab_size, cfg)?;
    Ok(SampleLabel {
        sample_id: String::new(),
        category: Category::Player,
        label: majority(known_count, forgotten_count),
        known_count,
        forgotten_count,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub known: usize,
    pub forgotten: usize,
    pub excluded: usize,
}

impl Tally {
    pub fn total(&self) -> usize {
        self.known + self.forgotten + self.excluded
    }

    fn add(&mut self, label: Label) {
        match label {
            Label::Known => self.known += 1,
            Label::Forgotten => self.forgotten += 1,
            Label::Excluded => self.excluded += 1,
        }
    }

    /// `#known / #forgotten`, or `None` without forgotten samples.
    pub fn ratio(&self) -> Option<f64> {
        (self.forgotten > 0).then(|| self.known as f64 / self.forgotten as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub band: BandConfig,
    pub vocab_size: usize,
    pub labels: Vec<SampleLabel>,
    pub per_category: BTreeMap<Category, Tally>,
    pub totals: Tally,
    pub ratio: Option<f64>,
}

impl LabeledDataset {
    pub fn from_labels(band: BandConfig, vocab_size: usize, labels: Vec<SampleLabel>) -> Self {
        let mut per_category: BTreeMap<Category, Tally> = BTreeMap::new();
        let mut totals = Tally::default();
        for s in &labels {
            per_category.entry(s.category).or_default().add(s.label);
            totals.add(s.label);
        }
        Self { band, vocab_size, labels, per_category, ratio: totals.ratio(), totals }
    }

    pub fn get(&self, sample_id: &str) -> Option<&SampleLabel> {
        self.labels.iter().find(|s| s.sample_id == sample_id)
    }
}

pub fn label_dataset(records: &[RankRecord], cfg: &BandConfig) -> Result<LabeledDataset> {
    let vocab_size = records.first().map_or(0, |r| r.vocab_size);
    if let Some(r) = records.iter().find(|r| r.vocab_size != vocab_size) {
        return Err(Error::consistency(format!(
            "{} has vocab size {}, expected {vocab_size}",
            r.sample_id, r.vocab_size
        )));
    }
    if !records.is_empty() {
        cfg.validate(vocab_size)?;
    }
    let labels = records
        .iter()
        .map(|r| {
            let (known_count, forgotten_count) = count_bands(&r.ranks, vocab_size, cfg)?;
            Ok(SampleLabel {
                sample_id: r.sample_id.clone(),
                category: r.category,
                label: majority(known_count, forgotten_count),
                known_count,
                forgotten_count,
            })
        })
        .collect::<Result<_>>()?;
    Ok(LabeledDataset::from_labels(*cfg, vocab_size, labels))
}

pub fn class_ratio(labeled: &LabeledDataset) -> Result<f64> {
    labeled
        .ratio
        .ok_or_else(|| Error::DegenerateData("known:forgotten ratio is undefined without forgotten samples".into()))
}

pub fn write_labels(path: &Path, labeled: &LabeledDataset) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for s in &labeled.labels {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<SampleLabel>> {
    let reader = BufReader::new(File::open(path)?);
    let mut labels = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        labels.push(
            serde_json::from_str(&line).map_err(|e| Error::input(format!("{} line {}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub band: BandConfig,
    pub vocab_size: usize,
    pub forgotten_threshold: u64,
    pub n_samples: usize,
    pub totals: Tally,
    pub per_category: BTreeMap<Category, Tally>,
    /// `null` when no sample is forgotten.
    pub ratio: Option<f64>,
}

impl LabelSummary {
    pub fn of(labeled: &LabeledDataset) -> Self {
        Self {
            band: labeled.band,
            vocab_size: labeled.vocab_size,
            forgotten_threshold: labeled.band.forgotten_threshold(labeled.vocab_size),
            n_samples: labeled.labels.len(),
            totals: labeled.totals,
            per_category: labeled.per_category.clone(),
            ratio: labeled.ratio,
        }
    }
}

pub fn write_summary(path: &Path, labeled: &LabeledDataset) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(&LabelSummary::of(labeled))?)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<LabelSummary> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

/// Reads `labels.jsonl` and `label_summary.json` from one directory.
pub fn read_labeled(dir: &Path) -> Result<LabeledDataset> {
    let summary = read_summary(&dir.join("label_summary.json"))?;
    let labels = read_labels(&dir.join("labels.jsonl"))?;
    Ok(LabeledDataset::from_labels(summary.band, summary.vocab_size, labels))
}
