// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::relations::Category;
use super::response::RawRow;
use crate::error::{Error, Result};

/// Maximum number of distinct relations kept per entity.
pub const MAX_RELATIONS_PER_ENTITY: usize = 10;

/// One (entity type, entity name, relation, attribute) quadruple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactRecord {
    pub sample_id: String,
    pub category: Category,
    pub entity_qid: String,
    pub entity_name: String,
    pub relation_key: String,
    pub attribute_text: String,
}

impl FactRecord {
    pub fn new(
        category: Category,
        entity_qid: impl Into<String>,
        entity_name: impl Into<String>,
        relation_key: impl Into<String>,
        attribute_text: impl Into<String>,
    ) -> Self {
        let entity_qid = entity_qid.into();
        let relation_key = relation_key.into();
        Self {
            sample_id: format!("{category}/{entity_qid}/{relation_key}"),
            category,
            entity_qid,
            entity_name: entity_name.into(),
            relation_key,
            attribute_text: attribute_text.into(),
        }
    }

    pub(crate) fn from_raw(row: &RawRow) -> Self {
        Self::new(
            row.category,
            row.entity_qid.clone(),
            row.entity_name.clone(),
            row.relation_key.clone(),
            row.attribute_text.clone(),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildManifest {
    pub endpoint_url: Option<String>,
    pub retrieval_timestamp: Option<String>,
    /// Distinct entities per category.
    pub entity_counts: BTreeMap<Category, usize>,
    /// Facts per `category/relation_key`.
    pub fact_counts: BTreeMap<String, usize>,
    #[serde(default)]
    pub dropped_bindings: usize,
}

impl BuildManifest {
    pub fn total_facts(&self) -> usize {
        self.fact_counts.values().sum()
    }
}

/// Normalizes raw rows into fact records.
///
/// Duplicate `(entity_qid, relation_key)` pairs keep their first occurrence.
/// Entities with more than ten relations keep the ten lexicographically
/// smallest relation keys. Row order is otherwise preserved, which makes the
/// operation idempotent.
pub fn build_fact_records(rows: &[RawRow]) -> (Vec<FactRecord>, BuildManifest) {
    let mut seen = HashSet::new();
    let mut deduped = Vec::with_capacity(rows.len());
    for row in rows {
        if seen.insert((row.entity_qid.as_str(), row.relation_key.as_str())) {
            deduped.push(row);
        }
    }

    let mut relations_by_entity: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for row in &deduped {
        relations_by_entity
            .entry(row.entity_qid.as_str())
            .or_default()
            .insert(row.relation_key.as_str());
    }
    let allowed: HashMap<&str, HashSet<&str>> = relations_by_entity
        .into_iter()
        .map(|(qid, keys)| (qid, keys.into_iter().take(MAX_RELATIONS_PER_ENTITY).collect()))
        .collect();

    let records: Vec<FactRecord> = deduped
        .into_iter()
        .filter(|row| allowed[row.entity_qid.as_str()].contains(row.relation_key.as_str()))
        .map(FactRecord::from_raw)
        .collect();
    let manifest = manifest_for(&records);
    (records, manifest)
}

/// Counts entities and facts of a record list.
pub fn manifest_for(records: &[FactRecord]) -> BuildManifest {
    let mut entities: BTreeMap<Category, BTreeSet<&str>> = BTreeMap::new();
    let mut fact_counts = BTreeMap::new();
    for rec in records {
        entities.entry(rec.category).or_default().insert(&rec.entity_qid);
        *fact_counts
            .entry(format!("{}/{}", rec.category, rec.relation_key))
            .or_insert(0) += 1;
    }
    BuildManifest {
        endpoint_url: None,
        retrieval_timestamp: None,
        entity_counts: entities.into_iter().map(|(c, s)| (c, s.len())).collect(),
        fact_counts,
        dropped_bindings: 0,
    }
}

/// Writes `facts.jsonl`, one record per line.
pub fn write_facts(path: &Path, records: &[FactRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_facts(path: &Path) -> Result<Vec<FactRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FactRecord = serde_json::from_str(&line)
            .map_err(|e| Error::input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if rec.attribute_text.is_empty() {
            return Err(Error::input(format!("{}:{}: empty attribute", path.display(), i + 1)));
        }
        records.push(rec);
    }
    Ok(records)
}
