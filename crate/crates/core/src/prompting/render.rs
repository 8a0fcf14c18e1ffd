// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::templates::TemplateSet;
use crate::dataset::FactRecord;
use crate::error::{Error, Result};
use crate::seeding::derived_rng;

/// Fixed distractor prepended by [`PerturbationKind::RandomSentence`].
pub const RANDOM_SENTENCE: &str = "The cat darted under the couch as the thunder cracked outside. ";

/// Number of completed examples in a few-shot context.
pub const FEW_SHOT_COUNT: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PerturbationKind {
    #[default]
    None,
    QuoteSingle,
    QuoteDouble,
    StatementQuestion,
    FewShotOnly,
    FewShotUnique,
    RandomSentence,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 7] = [
        PerturbationKind::None,
        PerturbationKind::QuoteSingle,
        PerturbationKind::QuoteDouble,
        PerturbationKind::StatementQuestion,
        PerturbationKind::FewShotOnly,
        PerturbationKind::FewShotUnique,
        PerturbationKind::RandomSentence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::None => "none",
            PerturbationKind::QuoteSingle => "quote_single",
            PerturbationKind::QuoteDouble => "quote_double",
            PerturbationKind::StatementQuestion => "statement_question",
            PerturbationKind::FewShotOnly => "few_shot_only",
            PerturbationKind::FewShotUnique => "few_shot_unique",
            PerturbationKind::RandomSentence => "random_sentence",
        }
    }

    pub fn few_shot_mode(self) -> Option<FewShotMode> {
        match self {
            PerturbationKind::FewShotOnly => Some(FewShotMode::Only),
            PerturbationKind::FewShotUnique => Some(FewShotMode::Unique),
            _ => None,
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for PerturbationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PerturbationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown perturbation `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FewShotMode {
    /// Same entity name, distinct relations.
    Only,
    /// Distinct entity names.
    Unique,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub sample_id: String,
    pub perturbation: PerturbationKind,
    pub text: String,
    pub few_shot_sample_ids: Vec<String>,
}

impl RenderedPrompt {
    /// Byte offset where the final whitespace-separated token of the prompt starts.
    pub fn final_token_char_offset(&self) -> usize {
        self.text.trim_end().rfind(char::is_whitespace).map_or(0, |i| i + 1)
    }
}

/// "What is the {relation_phrase} for the {entity_type} {entity_name}? "
pub fn statement_question(fact: &FactRecord, templates: &TemplateSet) -> Result<String> {
    let entry = templates.get(fact.category, &fact.relation_key)?;
    if entry.relation_phrase.trim().is_empty() {
        return Err(Error::config(format!("empty relation phrase for {}", fact.sample_id)));
    }
    Ok(format!(
        "What is the {} for the {} {}? ",
        entry.relation_phrase,
        fact.category.entity_type(),
        fact.entity_name
    ))
}

fn same_pair(a: &FactRecord, b: &FactRecord) -> bool {
    a.entity_qid == b.entity_qid && a.relation_key == b.relation_key
}

/// Picks `n` context facts for `fact`, uniformly under `rng`.
///
/// `Only` draws distinct relations of the same entity name; `Unique` draws
/// distinct entity names. The query's own (entity, relation) pair is never
/// eligible.
pub fn select_few_shot<'p, R: Rng + ?Sized>(
    fact: &FactRecord,
    pool: &'p [FactRecord],
    mode: FewShotMode,
    n: usize,
    rng: &mut R,
) -> Result<Vec<&'p FactRecord>> {
    let mut groups: BTreeMap<&str, Vec<&FactRecord>> = BTreeMap::new();
    for cand in pool.iter().filter(|c| !same_pair(c, fact)) {
        let key = match mode {
            FewShotMode::Only if cand.entity_name != fact.entity_name => continue,
            FewShotMode::Only => cand.relation_key.as_str(),
            FewShotMode::Unique => cand.entity_name.as_str(),
        };
        groups.entry(key).or_default().push(cand);
    }
    if groups.len() < n {
        return Err(Error::PoolExhausted { needed: n, available: groups.len() });
    }
    let groups: Vec<Vec<&FactRecord>> = groups.into_values().collect();
    let mut chosen: Vec<&FactRecord> = index::sample(rng, groups.len(), n)
        .into_iter()
        .map(|g| groups[g][rng.gen_range(0..groups[g].len())])
        .collect();
    chosen.shuffle(rng);
    Ok(chosen)
}

/// Renders `fact` under `perturbation`.
///
/// Few-shot kinds draw their context from `context_pool` using a generator
/// derived from `(seed, sample_id)`, so rendering is a pure function of its
/// inputs.
pub fn render(
    fact: &FactRecord,
    templates: &TemplateSet,
    perturbation: PerturbationKind,
    context_pool: &[FactRecord],
    seed: u64,
) -> Result<RenderedPrompt> {
    let entry = templates.get(fact.category, &fact.relation_key)?;
    let entity_type = fact.category.entity_type();
    let base = entry.fill(entity_type, &fact.entity_name);
    let mut few_shot_sample_ids = Vec::new();
    let text = match perturbation {
        PerturbationKind::None => base,
        PerturbationKind::QuoteSingle => entry.fill(entity_type, &format!("'{}'", fact.entity_name)),
        PerturbationKind::QuoteDouble => entry.fill(entity_type, &format!("\"{}\"", fact.entity_name)),
        PerturbationKind::StatementQuestion => statement_question(fact, templates)? + &base,
        PerturbationKind::RandomSentence => format!("{RANDOM_SENTENCE}{base}"),
        PerturbationKind::FewShotOnly | PerturbationKind::FewShotUnique => {
            let mode = perturbation.few_shot_mode().expect("few-shot kind");
            let mut rng = derived_rng(seed, &fact.sample_id);
            let examples = select_few_shot(fact, context_pool, mode, FEW_SHOT_COUNT, &mut rng)?;
            let mut lines = Vec::with_capacity(FEW_SHOT_COUNT + 1);
            for ex in examples {
                lines.push(format!("{} {}.", templates.statement(ex)?, ex.attribute_text));
                few_shot_sample_ids.push(ex.sample_id.clone());
            }
            lines.push(base);
            lines.join("\n")
        }
    };
    Ok(RenderedPrompt { sample_id: fact.sample_id.clone(), perturbation, text, few_shot_sample_ids })
}

/// Renders every fact, using the whole fact list as the few-shot pool.
pub fn render_all(
    facts: &[FactRecord],
    templates: &TemplateSet,
    perturbation: PerturbationKind,
    seed: u64,
) -> Result<Vec<RenderedPrompt>> {
    facts.iter().map(|f| render(f, templates, perturbation, facts, seed)).collect()
}

pub fn write_prompts(path: &Path, prompts: &[RenderedPrompt]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for p in prompts {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_prompts(path: &Path) -> Result<Vec<RenderedPrompt>> {
    let reader = BufReader::new(File::open(path)?);
    let mut prompts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        prompts.push(
            serde_json::from_str(&line).map_err(|e| Error::input(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(prompts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Category;
    use crate::prompting::TemplateId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn djorkaeff() -> FactRecord {
        FactRecord::new(Category::Player, "Q1", "Youri Djorkaeff", "birth_place", "Lyon")
    }

    fn templates() -> TemplateSet {
        TemplateSet::shipped(TemplateId::Template2)
    }

    #[test]
    fn base_and_quoted_statements() {
        let t = templates();
        let r = |k| render(&djorkaeff(), &t, k, &[], 0).unwrap().text;
        assert_eq!(r(PerturbationKind::None), "The city of birth for the player Youri Djorkaeff is");
        assert_eq!(r(PerturbationKind::QuoteSingle), "The city of birth for the player 'Youri Djorkaeff' is");
        assert_eq!(r(PerturbationKind::QuoteDouble), "The city of birth for the player \"Youri Djorkaeff\" is");
        assert_eq!(
            r(PerturbationKind::RandomSentence),
            "The cat darted under the couch as the thunder cracked outside. \
             The city of birth for the player Youri Djorkaeff is"
        );
    }

    #[test]
    fn questions_follow_the_fixed_pattern() {
        let t = templates();
        assert_eq!(
            statement_question(&djorkaeff(), &t).unwrap(),
            "What is the city of birth for the player Youri Djorkaeff? "
        );
        let inception = FactRecord::new(Category::Movie, "Q25188", "Inception", "director", "Christopher Nolan");
        assert_eq!(statement_question(&inception, &t).unwrap(), "What is the director for the movie Inception? ");
        let q = render(&djorkaeff(), &t, PerturbationKind::StatementQuestion, &[], 0).unwrap();
        assert_eq!(
            q.text,
            "What is the city of birth for the player Youri Djorkaeff? The city of birth for the player Youri Djorkaeff is"
        );
    }

    #[test]
    fn empty_relation_phrase_is_config_error() {
        use crate::prompting::TemplateEntry;
        let entry = TemplateEntry {
            pattern: "The {relation_phrase} for the {entity_type} {entity_name} is".into(),
            relation_phrase: " ".into(),
        };
        let set =
            TemplateSet::from_entries(TemplateId::Template2, [((Category::Player, "birth_place".into()), entry)]).unwrap();
        assert!(matches!(statement_question(&djorkaeff(), &set), Err(Error::Config(_))));
    }

    #[test]
    fn missing_template_is_config_error() {
        let fact = FactRecord::new(Category::Player, "Q1", "X", "shoe_size", "44");
        assert!(matches!(render(&fact, &templates(), PerturbationKind::None, &[], 0), Err(Error::Config(_))));
    }

    fn djorkaeff_relations() -> Vec<FactRecord> {
        vec![
            FactRecord::new(Category::Player, "Q1", "Youri Djorkaeff", "birth_date", "9 March 1968"),
            FactRecord::new(Category::Player, "Q1", "Youri Djorkaeff", "position", "midfielder"),
            FactRecord::new(Category::Player, "Q1", "Youri Djorkaeff", "nationality", "France"),
        ]
    }

    #[test]
    fn only_mode_with_exactly_three_candidates_takes_them_all() {
        let pool = djorkaeff_relations();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let picked = select_few_shot(&djorkaeff(), &pool, FewShotMode::Only, 3, &mut rng).unwrap();
        let keys: HashSet<_> = picked.iter().map(|f| f.relation_key.as_str()).collect();
        assert_eq!(keys, HashSet::from(["birth_date", "position", "nationality"]));
    }

    #[test]
    fn only_mode_with_too_few_relations_is_exhausted() {
        let pool = djorkaeff_relations()[..1].to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(matches!(
            select_few_shot(&djorkaeff(), &pool, FewShotMode::Only, 3, &mut rng),
            Err(Error::PoolExhausted { needed: 3, available: 1 })
        ));
    }

    #[test]
    fn unique_mode_draws_distinct_names() {
        let pool = vec![
            FactRecord::new(Category::Movie, "Q10", "Alpha", "genre", "drama"),
            FactRecord::new(Category::Movie, "Q10", "Alpha", "director", "A"),
            FactRecord::new(Category::Movie, "Q11", "Beta", "genre", "comedy"),
            FactRecord::new(Category::Movie, "Q12", "Gamma", "genre", "horror"),
            FactRecord::new(Category::Movie, "Q12", "Gamma", "country", "Chile"),
        ];
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let picked = select_few_shot(&djorkaeff(), &pool, FewShotMode::Unique, 3, &mut rng).unwrap();
            let names: HashSet<_> = picked.iter().map(|f| f.entity_name.as_str()).collect();
            assert_eq!(names.len(), 3, "seed {seed}");
        }
    }

    #[test]
    fn few_shot_prompt_layout() {
        let t = templates();
        let pool = djorkaeff_relations();
        let p = render(&djorkaeff(), &t, PerturbationKind::FewShotOnly, &pool, 73).unwrap();
        let lines: Vec<_> = p.text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "The city of birth for the player Youri Djorkaeff is");
        assert!(lines[..3].iter().all(|l| l.ends_with('.')));
        assert_eq!(p.few_shot_sample_ids.len(), 3);
        assert!(p.text.ends_with("is"));
        assert_eq!(&p.text[p.final_token_char_offset()..], "is");
    }
}
