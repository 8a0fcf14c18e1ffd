// SPDX-License-Identifier: MIT OR Apache-2.0

//! Factual-recall dataset construction from Wikidata.
//!
//! The builder queries one category at a time, parses the standard JSON
//! results envelope into raw rows and normalizes them into [`FactRecord`]s.
//! Offline runs read previously saved envelopes (`{category}.json`) from a
//! directory instead of the network.

mod client;
mod query;
mod records;
mod relations;
mod response;
mod synthetic;

use std::path::Path;

pub use client::{
    resolve_endpoint, user_agent_from_env, Clock, HttpResponse, ReqwestTransport, SparqlClient, SystemClock,
    Transport, DEFAULT_ENDPOINT, ENDPOINT_ENV, USER_AGENT_ENV,
};
pub use query::{build_category_query, EntityOrder};
pub use records::{
    build_fact_records, manifest_for, read_facts, write_facts, BuildManifest, FactRecord, MAX_RELATIONS_PER_ENTITY,
};
pub use relations::{
    find_relation, relations_for, shipped_relations, AnswerModality, Category, RelationSpec, ValueShape,
};
pub use response::{normalize_date, parse_response, ParsedResponse, RawRow};
pub use synthetic::synthetic_facts;

use crate::error::Result;

fn limit_entities(rows: Vec<RawRow>, entity_limit: usize) -> Vec<RawRow> {
    let mut kept = std::collections::HashSet::new();
    rows.into_iter()
        .filter(|r| kept.contains(&r.entity_qid) || (kept.len() < entity_limit && kept.insert(r.entity_qid.clone())))
        .collect()
}

fn finish(rows: Vec<RawRow>, dropped: usize, endpoint: Option<String>) -> (Vec<FactRecord>, BuildManifest) {
    let (records, mut manifest) = build_fact_records(&rows);
    manifest.endpoint_url = endpoint;
    manifest.dropped_bindings = dropped;
    (records, manifest)
}

/// Queries the endpoint once per category and builds the record set.
pub fn build_dataset_live<T: Transport, C: Clock>(
    client: &mut SparqlClient<T, C>,
    categories: &[Category],
    entity_limit: usize,
    order: EntityOrder,
) -> Result<(Vec<FactRecord>, BuildManifest)> {
    let mut rows = Vec::new();
    let mut dropped = 0;
    for &category in categories {
        let query = build_category_query(category, &relations_for(category), entity_limit, order)?;
        let body = client.fetch(&query)?;
        let parsed = parse_response(&body, category)?;
        dropped += parsed.dropped;
        rows.extend(limit_entities(parsed.rows, entity_limit));
    }
    let mut out = finish(rows, dropped, Some(client.endpoint().to_owned()));
    out.1.retrieval_timestamp = Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    Ok(out)
}

/// Builds the record set from saved result envelopes named `{category}.json`.
pub fn build_dataset_offline(
    dir: &Path,
    categories: &[Category],
    entity_limit: usize,
) -> Result<(Vec<FactRecord>, BuildManifest)> {
    let mut rows = Vec::new();
    let mut dropped = 0;
    for &category in categories {
        let body = std::fs::read_to_string(dir.join(format!("{category}.json")))?;
        let parsed = parse_response(&body, category)?;
        dropped += parsed.dropped;
        rows.extend(limit_entities(parsed.rows, entity_limit));
    }
    Ok(finish(rows, dropped, None))
}
