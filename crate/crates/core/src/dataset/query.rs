// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::relations::{Category, RelationSpec, ValueShape};
use crate::error::{Error, Result};

/// Variables every category query binds besides the relation columns.
pub(crate) const ENTITY_VAR: &str = "item";
pub(crate) const LABEL_VAR: &str = "itemLabel";
/// Helper columns (ordering keys) carry this prefix and are not relations.
pub(crate) const AUX_PREFIX: &str = "aux_";

/// How the entity subset is chosen before the limit applies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EntityOrder {
    /// Most sitelinks first, a rough popularity ranking.
    #[default]
    SitelinksDesc,
    /// Whatever order the endpoint returns.
    Unordered,
}

const PREFIXES: &str = "\
PREFIX wd: <http://www.wikidata.org/entity/>
PREFIX wdt: <http://www.wikidata.org/prop/direct/>
PREFIX p: <http://www.wikidata.org/prop/>
PREFIX ps: <http://www.wikidata.org/prop/statement/>
PREFIX pq: <http://www.wikidata.org/prop/qualifier/>
PREFIX wikibase: <http://wikiba.se/ontology#>
PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>
";

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_property_id(s: &str) -> bool {
    s.len() > 1 && s.starts_with('P') && s[1..].bytes().all(|b| b.is_ascii_digit())
}

/// Builds a SPARQL SELECT that returns one column per relation for the first
/// `entity_limit` entities of `category`.
pub fn build_category_query(
    category: Category,
    relations: &[RelationSpec],
    entity_limit: usize,
    order: EntityOrder,
) -> Result<String> {
    if entity_limit == 0 {
        return Err(Error::config("entity limit must be at least 1"));
    }
    if relations.is_empty() {
        return Err(Error::config(format!("no relations given for category {category}")));
    }
    for rel in relations {
        if rel.category != category {
            return Err(Error::config(format!(
                "relation {} belongs to {}, not {category}",
                rel.relation_key, rel.category
            )));
        }
        if !is_identifier(&rel.relation_key) || rel.relation_key.starts_with(AUX_PREFIX) {
            return Err(Error::config(format!("relation key `{}` is not a usable variable name", rel.relation_key)));
        }
        if !is_property_id(&rel.wikidata_property) {
            return Err(Error::config(format!("`{}` is not a property id", rel.wikidata_property)));
        }
    }

    let (class_pred, class_obj) = category.class_pattern();
    let mut select = format!("?{ENTITY_VAR} ?{LABEL_VAR}");
    let mut order_keys = Vec::new();
    if order == EntityOrder::SitelinksDesc {
        select.push_str(" ?aux_links");
        order_keys.push("DESC(?aux_links)".to_owned());
    }
    order_keys.push(format!("?{ENTITY_VAR}"));
    for rel in relations {
        write!(select, " ?{}", rel.relation_key).unwrap();
        if rel.value_shape == ValueShape::EarliestItemLabel {
            write!(select, " ?aux_{}_start", rel.relation_key).unwrap();
            order_keys.push(format!("?aux_{}_start", rel.relation_key));
        }
    }

    let mut q = String::from(PREFIXES);
    writeln!(q, "SELECT {select} WHERE {{").unwrap();
    match order {
        EntityOrder::SitelinksDesc => {
            writeln!(q, "  {{").unwrap();
            writeln!(q, "    SELECT ?{ENTITY_VAR} ?aux_links WHERE {{").unwrap();
            writeln!(q, "      ?{ENTITY_VAR} {class_pred} {class_obj} ;").unwrap();
            writeln!(q, "            wikibase:sitelinks ?aux_links .").unwrap();
            writeln!(q, "    }}").unwrap();
            writeln!(q, "    ORDER BY DESC(?aux_links)").unwrap();
            writeln!(q, "    LIMIT {entity_limit}").unwrap();
            writeln!(q, "  }}").unwrap();
        }
        EntityOrder::Unordered => {
            writeln!(q, "  {{").unwrap();
            writeln!(q, "    SELECT DISTINCT ?{ENTITY_VAR} WHERE {{").unwrap();
            writeln!(q, "      ?{ENTITY_VAR} {class_pred} {class_obj} .").unwrap();
            writeln!(q, "    }}").unwrap();
            writeln!(q, "    LIMIT {entity_limit}").unwrap();
            writeln!(q, "  }}").unwrap();
        }
    }
    writeln!(
        q,
        "  OPTIONAL {{ ?{ENTITY_VAR} rdfs:label ?{LABEL_VAR} . FILTER(LANG(?{LABEL_VAR}) = \"en\") }}"
    )
    .unwrap();
    for rel in relations {
        let key = &rel.relation_key;
        let prop = &rel.wikidata_property;
        match rel.value_shape {
            ValueShape::Date => {
                writeln!(q, "  OPTIONAL {{ ?{ENTITY_VAR} wdt:{prop} ?{key} . }}").unwrap();
            }
            ValueShape::ItemLabel => {
                writeln!(
                    q,
                    "  OPTIONAL {{ ?{ENTITY_VAR} wdt:{prop} ?aux_{key}_item . \
                     ?aux_{key}_item rdfs:label ?{key} . FILTER(LANG(?{key}) = \"en\") }}"
                )
                .unwrap();
            }
            ValueShape::EarliestItemLabel => {
                writeln!(
                    q,
                    "  OPTIONAL {{ ?{ENTITY_VAR} p:{prop} ?aux_{key}_stmt . \
                     ?aux_{key}_stmt ps:{prop} ?aux_{key}_item ; pq:P580 ?aux_{key}_start . \
                     ?aux_{key}_item rdfs:label ?{key} . FILTER(LANG(?{key}) = \"en\") }}"
                )
                .unwrap();
            }
        }
    }
    writeln!(q, "}}").unwrap();
    writeln!(q, "ORDER BY {}", order_keys.join(" ")).unwrap();
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::relations::relations_for;

    fn balanced(q: &str) -> bool {
        let mut depth = 0i32;
        for c in q.chars() {
            match c {
                '{' => depth += 1,
                '}' => depth -= 1,
                _ => {}
            }
            if depth < 0 {
                return false;
            }
        }
        depth == 0
    }

    #[test]
    fn player_query_names_every_property() {
        let q = build_category_query(Category::Player, &relations_for(Category::Player), 1000, EntityOrder::SitelinksDesc)
            .unwrap();
        for prop in ["wdt:P19", "wdt:P569", "wdt:P413", "wdt:P27"] {
            assert!(q.contains(prop), "missing {prop}");
        }
        assert!(q.contains("wd:Q937857"));
        assert!(q.contains("LIMIT 1000"));
        assert!(q.trim_start().starts_with("PREFIX"));
        assert!(balanced(&q));
    }

    #[test]
    fn empty_relations_is_config_error() {
        let err = build_category_query(Category::City, &[], 1000, EntityOrder::SitelinksDesc).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn limit_passes_through() {
        let rels = relations_for(Category::Song);
        let q = build_category_query(Category::Song, &rels[..1], 1, EntityOrder::Unordered).unwrap();
        assert!(q.contains("LIMIT 1\n"));
        assert!(balanced(&q));
    }

    #[test]
    fn foreign_relation_is_rejected() {
        let rels = relations_for(Category::Movie);
        let err = build_category_query(Category::City, &rels, 10, EntityOrder::SitelinksDesc).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = build_category_query(Category::Movie, &rels, 0, EntityOrder::SitelinksDesc).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn earliest_statement_adds_ordering_key() {
        let q = build_category_query(Category::City, &relations_for(Category::City), 5, EntityOrder::SitelinksDesc)
            .unwrap();
        assert!(q.contains("pq:P580 ?aux_first_mayor_start"));
        assert!(q.contains("ORDER BY DESC(?aux_links) ?item ?aux_first_mayor_start"));
    }
}
