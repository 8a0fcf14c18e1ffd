// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Entity category of a fact. Doubles as the entity type word in prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Player,
    Movie,
    City,
    Song,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Player, Category::Movie, Category::City, Category::Song];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Player => "player",
            Category::Movie => "movie",
            Category::City => "city",
            Category::Song => "song",
        }
    }

    /// Word used for the `{entity_type}` template slot.
    pub fn entity_type(self) -> &'static str {
        self.as_str()
    }

    /// Triple pattern (predicate, object) selecting members of the category.
    pub(crate) fn class_pattern(self) -> (&'static str, &'static str) {
        match self {
            // occupation: association football player
            Category::Player => ("wdt:P106", "wd:Q937857"),
            // instance of: film
            Category::Movie => ("wdt:P31", "wd:Q11424"),
            // instance of: city
            Category::City => ("wdt:P31", "wd:Q515"),
            // instance of: song
            Category::Song => ("wdt:P31", "wd:Q7366"),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "player" | "football player" => Ok(Category::Player),
            "movie" => Ok(Category::Movie),
            "city" => Ok(Category::City),
            "song" => Ok(Category::Song),
            other => Err(Error::config(format!("unknown category `{other}`"))),
        }
    }
}

/// Surface form expected from the model for a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnswerModality {
    Name,
    Date,
    Place,
    CategoryWord,
    Language,
    Country,
}

/// How a relation's attribute is read out of the knowledge graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueShape {
    /// Item-valued property; the English label of the target is used.
    ItemLabel,
    /// Time-valued property; rendered as "D Month YYYY".
    Date,
    /// Item-valued property where the statement with the earliest start time wins.
    EarliestItemLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub category: Category,
    pub relation_key: String,
    pub wikidata_property: String,
    pub relation_phrase: String,
    pub answer_modality: AnswerModality,
    pub value_shape: ValueShape,
}

impl RelationSpec {
    fn shipped(
        category: Category,
        key: &str,
        property: &str,
        phrase: &str,
        modality: AnswerModality,
        shape: ValueShape,
    ) -> Self {
        Self {
            category,
            relation_key: key.to_owned(),
            wikidata_property: property.to_owned(),
            relation_phrase: phrase.to_owned(),
            answer_modality: modality,
            value_shape: shape,
        }
    }
}

/// The balanced relation set: four relations per category.
pub fn shipped_relations() -> Vec<RelationSpec> {
    use AnswerModality as M;
    use Category::*;
    use ValueShape as S;
    vec![
        RelationSpec::shipped(Player, "birth_place", "P19", "city of birth", M::Place, S::ItemLabel),
        RelationSpec::shipped(Player, "birth_date", "P569", "date of birth", M::Date, S::Date),
        RelationSpec::shipped(Player, "position", "P413", "playing position", M::CategoryWord, S::ItemLabel),
        RelationSpec::shipped(Player, "nationality", "P27", "nationality", M::Country, S::ItemLabel),
        RelationSpec::shipped(Movie, "director", "P57", "director", M::Name, S::ItemLabel),
        RelationSpec::shipped(Movie, "release_date", "P577", "release date", M::Date, S::Date),
        RelationSpec::shipped(Movie, "genre", "P136", "genre", M::CategoryWord, S::ItemLabel),
        RelationSpec::shipped(Movie, "country", "P495", "country of origin", M::Country, S::ItemLabel),
        RelationSpec::shipped(City, "country", "P17", "country", M::Country, S::ItemLabel),
        RelationSpec::shipped(City, "first_mayor", "P6", "first mayor", M::Name, S::EarliestItemLabel),
        RelationSpec::shipped(City, "founded_date", "P571", "founding date", M::Date, S::Date),
        RelationSpec::shipped(City, "climate_type", "P2564", "climate type", M::CategoryWord, S::ItemLabel),
        RelationSpec::shipped(Song, "artist", "P175", "artist", M::Name, S::ItemLabel),
        RelationSpec::shipped(Song, "album", "P361", "album", M::Name, S::ItemLabel),
        RelationSpec::shipped(Song, "release_date", "P577", "release date", M::Date, S::Date),
        RelationSpec::shipped(Song, "language", "P407", "language", M::Language, S::ItemLabel),
    ]
}

/// Shipped relations of one category, in declaration order.
pub fn relations_for(category: Category) -> Vec<RelationSpec> {
    shipped_relations().into_iter().filter(|r| r.category == category).collect()
}

/// Looks up a shipped relation by category and key.
pub fn find_relation(category: Category, relation_key: &str) -> Option<RelationSpec> {
    shipped_relations()
        .into_iter()
        .find(|r| r.category == category && r.relation_key == relation_key)
}
