// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic stand-in facts for offline runs of the pipeline.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::records::FactRecord;
use super::relations::{relations_for, AnswerModality, Category};
use super::response::normalize_date;

const SYLLABLES: [&str; 24] = [
    "ka", "ro", "mi", "tel", "an", "dor", "vi", "lu", "sen", "pa", "gor", "ni", "bel", "za", "ur", "quin", "ma",
    "fe", "tor", "li", "ox", "ha", "ven", "dru",
];
const COUNTRIES: [&str; 8] = ["France", "Brazil", "Japan", "Norway", "Kenya", "Chile", "Italy", "Canada"];
const PLACES: [&str; 8] = ["Lyon", "Porto", "Osaka", "Bergen", "Nairobi", "Cordoba", "Turin", "Halifax"];
const LANGUAGES: [&str; 5] = ["English", "Spanish", "French", "German", "Italian"];

fn word(rng: &mut impl Rng, parts: usize) -> String {
    let mut w: String = (0..parts).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
    w[..1].make_ascii_uppercase();
    w
}

fn person(rng: &mut impl Rng) -> String {
    let (a, b) = (rng.gen_range(1..3), rng.gen_range(2..4));
    format!("{} {}", word(rng, a), word(rng, b))
}

fn category_words(category: Category, key: &str) -> &'static [&'static str] {
    match (category, key) {
        (Category::Player, _) => &["goalkeeper", "defender", "midfielder", "forward"],
        (Category::Movie, _) => &["drama", "comedy", "thriller", "horror", "documentary"],
        _ => &["oceanic climate", "humid subtropical climate", "hot desert climate", "continental climate"],
    }
}

fn attribute(rng: &mut impl Rng, category: Category, key: &str, modality: AnswerModality) -> String {
    match modality {
        AnswerModality::Name => person(rng),
        AnswerModality::Place => PLACES.choose(rng).unwrap().to_string(),
        AnswerModality::Country => COUNTRIES.choose(rng).unwrap().to_string(),
        AnswerModality::Language => LANGUAGES.choose(rng).unwrap().to_string(),
        AnswerModality::CategoryWord => category_words(category, key).choose(rng).unwrap().to_string(),
        AnswerModality::Date => {
            let raw = format!(
                "{}-{:02}-{:02}T00:00:00Z",
                rng.gen_range(1900..2020),
                rng.gen_range(1..=12),
                rng.gen_range(1..=28)
            );
            normalize_date(&raw).expect("well-formed date")
        }
    }
}

/// Generates `entities_per_category` entities for every category, each with
/// the four shipped relations.
pub fn synthetic_facts(entities_per_category: usize, seed: u64) -> Vec<FactRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(entities_per_category * 16);
    for (ci, category) in Category::ALL.into_iter().enumerate() {
        let relations = relations_for(category);
        for n in 0..entities_per_category {
            let qid = format!("Q{}{:06}", ci + 1, n);
            let name = match category {
                Category::Player => person(&mut rng),
                Category::City => word(&mut rng, 3),
                _ => format!("{} {}", word(&mut rng, 2), word(&mut rng, 2)),
            };
            for rel in &relations {
                let attr = attribute(&mut rng, category, &rel.relation_key, rel.answer_modality);
                out.push(FactRecord::new(category, qid.clone(), name.clone(), rel.relation_key.clone(), attr));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_facts_are_deterministic_and_unique() {
        let a = synthetic_facts(5, 9);
        assert_eq!(a, synthetic_facts(5, 9));
        assert_eq!(a.len(), 5 * 16);
        let ids: std::collections::HashSet<_> = a.iter().map(|r| &r.sample_id).collect();
        assert_eq!(ids.len(), a.len());
        assert!(a.iter().all(|r| !r.attribute_text.is_empty()));
    }
}
