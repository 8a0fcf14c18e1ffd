// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::query::{AUX_PREFIX, ENTITY_VAR, LABEL_VAR};
use super::relations::Category;
use crate::error::{Error, Result};

/// One (entity, relation) binding pulled out of a results envelope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRow {
    pub category: Category,
    pub entity_qid: String,
    pub entity_name: String,
    pub relation_key: String,
    pub attribute_text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedResponse {
    pub rows: Vec<RawRow>,
    /// Candidate (binding, relation) cells discarded for a missing label or attribute.
    pub dropped: usize,
}

#[derive(Deserialize)]
struct Envelope {
    head: Head,
    results: Results,
}

#[derive(Deserialize)]
struct Head {
    vars: Vec<String>,
}

#[derive(Deserialize)]
struct Results {
    bindings: Vec<BTreeMap<String, Term>>,
}

#[derive(Deserialize)]
struct Term {
    value: String,
    #[serde(default)]
    datatype: Option<String>,
}

fn byte_offset(body: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = body.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(body.len())
}

fn qid_from_uri(uri: &str) -> &str {
    uri.rsplit('/').next().unwrap_or(uri)
}

const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October",
    "November", "December",
];

/// Renders an `xsd:dateTime` lexical value as "D Month YYYY".
///
/// Year-only precision (month or day of `00`) collapses to the bare year.
pub fn normalize_date(value: &str) -> Option<String> {
    let (negative, rest) = match value.as_bytes().first() {
        Some(b'-') => (true, &value[1..]),
        Some(b'+') => (false, &value[1..]),
        _ => (false, value),
    };
    let date = rest.split('T').next()?;
    let mut parts = date.split('-');
    let year: i64 = parts.next()?.parse().ok()?;
    let month: usize = parts.next()?.parse().ok()?;
    let day: u32 = parts.next()?.parse().ok()?;
    let year = if negative { -year } else { year };
    if month == 0 || day == 0 {
        return Some(year.to_string());
    }
    let name = MONTHS.get(month - 1)?;
    Some(format!("{day} {name} {year}"))
}

fn attribute_text(term: &Term) -> Option<String> {
    let is_date = term
        .datatype
        .as_deref()
        .is_some_and(|dt| dt.ends_with("#dateTime") || dt.ends_with("#date"));
    let text = if is_date {
        normalize_date(&term.value)?
    } else {
        term.value.trim().to_owned()
    };
    (!text.is_empty()).then_some(text)
}

/// Parses a standard SPARQL JSON results body into raw rows.
///
/// Every head variable other than the entity, its label and `aux_` helpers is a
/// relation column.
pub fn parse_response(body: &str, category: Category) -> Result<ParsedResponse> {
    let envelope: Envelope = serde_json::from_str(body).map_err(|e| Error::Parse {
        offset: byte_offset(body, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let relation_vars: Vec<&str> = envelope
        .head
        .vars
        .iter()
        .map(String::as_str)
        .filter(|v| *v != ENTITY_VAR && *v != LABEL_VAR && !v.starts_with(AUX_PREFIX))
        .collect();

    let mut out = ParsedResponse::default();
    for binding in &envelope.results.bindings {
        let entity = binding.get(ENTITY_VAR).map(|t| qid_from_uri(&t.value).to_owned());
        let label = binding
            .get(LABEL_VAR)
            .map(|t| t.value.trim().to_owned())
            .filter(|s| !s.is_empty());
        let (Some(qid), Some(name)) = (entity, label) else {
            out.dropped += relation_vars.len();
            continue;
        };
        for var in &relation_vars {
            match binding.get(*var).and_then(attribute_text) {
                Some(attribute_text) => out.rows.push(RawRow {
                    category,
                    entity_qid: qid.clone(),
                    entity_name: name.clone(),
                    relation_key: (*var).to_owned(),
                    attribute_text,
                }),
                None => out.dropped += 1,
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dates_render_day_month_year() {
        assert_eq!(normalize_date("1968-03-31T00:00:00Z").as_deref(), Some("31 March 1968"));
        assert_eq!(normalize_date("+2010-07-16T00:00:00Z").as_deref(), Some("16 July 2010"));
        assert_eq!(normalize_date("1850-00-00T00:00:00Z").as_deref(), Some("1850"));
        assert_eq!(normalize_date("not a date"), None);
    }

    #[test]
    fn missing_attribute_is_dropped_and_counted() {
        let body = r#"{"head":{"vars":["item","itemLabel","genre"]},
            "results":{"bindings":[{"item":{"type":"uri","value":"http://www.wikidata.org/entity/Q25188"},
            "itemLabel":{"type":"literal","value":"Inception","xml:lang":"en"}}]}}"#;
        let parsed = parse_response(body, Category::Movie).unwrap();
        assert!(parsed.rows.is_empty());
        assert_eq!(parsed.dropped, 1);
    }

    #[test]
    fn missing_label_drops_every_relation_cell() {
        let body = r#"{"head":{"vars":["item","itemLabel","genre","director"]},
            "results":{"bindings":[{"item":{"type":"uri","value":"http://www.wikidata.org/entity/Q1"},
            "genre":{"type":"literal","value":"drama"}}]}}"#;
        let parsed = parse_response(body, Category::Movie).unwrap();
        assert!(parsed.rows.is_empty());
        assert_eq!(parsed.dropped, 2);
    }

    #[test]
    fn truncated_body_reports_offset() {
        let body = r#"{"head":{"vars":["item"]},"results":{"bindings":[{"item":"#;
        match parse_response(body, Category::City) {
            Err(Error::Parse { offset, .. }) => assert!(offset <= body.len() && offset > 40),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_result_set_is_not_an_error() {
        let body = r#"{"head":{"vars":["item","itemLabel","country"]},"results":{"bindings":[]}}"#;
        let parsed = parse_response(body, Category::City).unwrap();
        assert_eq!(parsed, ParsedResponse::default());
    }

    #[test]
    fn aux_columns_are_not_relations() {
        let body = r#"{"head":{"vars":["item","itemLabel","aux_links","country"]},
            "results":{"bindings":[{"item":{"type":"uri","value":"http://www.wikidata.org/entity/Q90"},
            "itemLabel":{"type":"literal","value":"Paris"},
            "aux_links":{"type":"literal","value":"300"},
            "country":{"type":"literal","value":"France"}}]}}"#;
        let parsed = parse_response(body, Category::City).unwrap();
        assert_eq!(parsed.rows.len(), 1);
        assert_eq!(parsed.rows[0].entity_qid, "Q90");
        assert_eq!(parsed.rows[0].relation_key, "country");
        assert_eq!(parsed.dropped, 0);
    }
}
