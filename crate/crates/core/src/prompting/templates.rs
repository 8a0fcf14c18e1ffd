// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{shipped_relations, Category, FactRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum TemplateId {
    /// Entity first, relation-specific ending.
    Template1,
    /// Entity first, always ends with "is".
    Template1ConstEnd,
    /// Relation first, entity last, ends with "is".
    Template2,
    /// `template2` over the balanced relation set (the default).
    #[default]
    Template2Balanced,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Template1 => "template1",
            TemplateId::Template1ConstEnd => "template1_const_end",
            TemplateId::Template2 => "template2",
            TemplateId::Template2Balanced => "template2_balanced",
        }
    }

    pub fn is_template2_family(self) -> bool {
        matches!(self, TemplateId::Template2 | TemplateId::Template2Balanced)
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "template1" => Ok(TemplateId::Template1),
            "template1_const_end" => Ok(TemplateId::Template1ConstEnd),
            "template2" => Ok(TemplateId::Template2),
            "template2_balanced" => Ok(TemplateId::Template2Balanced),
            other => Err(Error::config(format!("unknown template set `{other}`"))),
        }
    }
}

/// Statement pattern for one (category, relation) pair.
///
/// Slots: `{entity_type}`, `{entity_name}`, `{relation_phrase}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateEntry {
    pub pattern: String,
    pub relation_phrase: String,
}

impl TemplateEntry {
    pub fn fill(&self, entity_type: &str, entity_name: &str) -> String {
        self.pattern
            .replace("{relation_phrase}", &self.relation_phrase)
            .replace("{entity_type}", entity_type)
            .replace("{entity_name}", entity_name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub id: TemplateId,
    entries: BTreeMap<(Category, String), TemplateEntry>,
}

// (template1 ending, template1_const_end noun) per relation.
fn entity_first_phrases(category: Category, key: &str) -> (&'static str, &'static str) {
    match (category, key) {
        (Category::Player, "birth_place") => ("was born in the city of", "birth city"),
        (Category::Player, "birth_date") => ("was born on the date of", "birth date"),
        (Category::Player, "position") => ("plays in the position of", "playing position"),
        (Category::Player, "nationality") => ("has the nationality of", "nationality"),
        (Category::Movie, "director") => ("was directed by director", "director"),
        (Category::Movie, "release_date") => ("was released on the date of", "release date"),
        (Category::Movie, "genre") => ("belongs to the genre of", "genre"),
        (Category::Movie, "country") => ("was produced in the country of", "country of origin"),
        (Category::City, "country") => ("is located in the country of", "country"),
        (Category::City, "first_mayor") => ("had as its first mayor the person", "first mayor"),
        (Category::City, "founded_date") => ("was founded on the date of", "founding date"),
        (Category::City, "climate_type") => ("has the climate type of", "climate type"),
        (Category::Song, "artist") => ("was performed by the artist", "artist"),
        (Category::Song, "album") => ("appears on the album", "album"),
        (Category::Song, "release_date") => ("was released on the date of", "release date"),
        (Category::Song, "language") => ("is sung in the language", "language"),
        _ => ("has the attribute", "attribute"),
    }
}

impl TemplateSet {
    /// The shipped patterns for `id` over the balanced relation set.
    pub fn shipped(id: TemplateId) -> Self {
        let mut entries = BTreeMap::new();
        for rel in shipped_relations() {
            let (ending, noun) = entity_first_phrases(rel.category, &rel.relation_key);
            let pattern = match id {
                TemplateId::Template1 => format!("The {{entity_type}} {{entity_name}} {ending}"),
                TemplateId::Template1ConstEnd => format!("The {{entity_type}} {{entity_name}}'s {noun} is"),
                TemplateId::Template2 | TemplateId::Template2Balanced => {
                    "The {relation_phrase} for the {entity_type} {entity_name} is".to_owned()
                }
            };
            entries.insert(
                (rel.category, rel.relation_key.clone()),
                TemplateEntry { pattern, relation_phrase: rel.relation_phrase.clone() },
            );
        }
        Self { id, entries }
    }

    /// Builds a custom set, checking the structural rules of its family.
    pub fn from_entries(
        id: TemplateId,
        entries: impl IntoIterator<Item = ((Category, String), TemplateEntry)>,
    ) -> Result<Self> {
        let set = Self { id, entries: entries.into_iter().collect() };
        set.check()?;
        Ok(set)
    }

    fn check(&self) -> Result<()> {
        for ((category, key), entry) in &self.entries {
            if !entry.pattern.contains("{entity_name}") {
                return Err(Error::config(format!("{category}/{key}: pattern lacks {{entity_name}}")));
            }
            if self.id.is_template2_family()
                && !entry.pattern.ends_with("{entity_type} {entity_name} is")
            {
                return Err(Error::config(format!(
                    "{category}/{key}: {} patterns must end with the entity followed by \"is\"",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, category: Category, relation_key: &str) -> Result<&TemplateEntry> {
        self.entries
            .get(&(category, relation_key.to_owned()))
            .ok_or_else(|| Error::config(format!("no {} template for {category}/{relation_key}", self.id)))
    }

    /// The unperturbed statement for `fact`.
    pub fn statement(&self, fact: &FactRecord) -> Result<String> {
        Ok(self.get(fact.category, &fact.relation_key)?.fill(fact.category.entity_type(), &fact.entity_name))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_shipped_set_passes_its_own_checks() {
        for id in [TemplateId::Template1, TemplateId::Template1ConstEnd, TemplateId::Template2, TemplateId::Template2Balanced]
        {
            let set = TemplateSet::shipped(id);
            set.check().unwrap();
            assert_eq!(set.len(), 16);
        }
    }

    #[test]
    fn table_example_sentences() {
        let fact = FactRecord::new(Category::Player, "Q1", "Youri Djorkaeff", "birth_place", "Lyon");
        let s = |id| TemplateSet::shipped(id).statement(&fact).unwrap();
        assert_eq!(s(TemplateId::Template1), "The player Youri Djorkaeff was born in the city of");
        assert_eq!(s(TemplateId::Template1ConstEnd), "The player Youri Djorkaeff's birth city is");
        assert_eq!(s(TemplateId::Template2), "The city of birth for the player Youri Djorkaeff is");
        assert_eq!(s(TemplateId::Template2Balanced), "The city of birth for the player Youri Djorkaeff is");
    }

    #[test]
    fn template2_family_rejects_entity_first_patterns() {
        let entry = TemplateEntry {
            pattern: "The {entity_type} {entity_name} is from".into(),
            relation_phrase: "origin".into(),
        };
        let err = TemplateSet::from_entries(TemplateId::Template2, [((Category::City, "country".into()), entry)]);
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
