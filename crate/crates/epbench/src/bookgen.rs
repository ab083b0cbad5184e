//! Chapter generation, secondary-entity substitution, and book assembly.
//!
//! Each event drives a generation-verify-retry loop: render the chapter
//! prompt, call the author model, run the structural checks, then the
//! semantic judge; failures retry up to `itermax` times before the event
//! is discarded. Accepted chapters get their `$entity_X` placeholders
//! replaced by globally unique fresh names in a serialized post-pass, and
//! the book is assembled byte-exactly as
//! "Chapter {i}\n\n{chapter_text}\n\n\n" over accepted chapters.

use crate::eventgen::{Event, EventMeta};
use crate::gateway::{ChatBackend, ChatRequest, GatewayError, ModelSpec};
use crate::prompts;
use crate::seed::subseed;
use crate::universe::{parse_date, SeedCorpus, Universe};
use crate::verifier::{self, VerifierError};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BookError {
    #[error("secondary name pool exhausted")]
    PoolExhausted,
    #[error("cannot assemble an empty book")]
    EmptyBook,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// A chapter candidate accepted by both verification rounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChapterDraft {
    pub event_index: usize,
    /// Iteration (0-based) at which the draft was accepted.
    pub iteration: usize,
    pub raw_text: String,
    pub paragraphs: Vec<(usize, String)>,
}

/// Result of the generation loop for one event.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ChapterOutcome {
    Accepted(ChapterDraft),
    /// Event dropped after `itermax` failed iterations, with the cause of
    /// each failure in order.
    Discarded {
        event_index: usize,
        failures: Vec<String>,
    },
}

/// Model roles involved in book generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuthorConfig {
    pub author: ModelSpec,
    pub verifier_judge: ModelSpec,
    /// Sampling temperature for the author model.
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl AuthorConfig {
    pub fn new(author: ModelSpec, verifier_judge: ModelSpec) -> Self {
        Self {
            author,
            verifier_judge,
            temperature: 1.0,
            max_output_tokens: 4096,
        }
    }
}

/// Run the generation-verify-retry loop for one event.
pub fn generate_chapter(
    backend: &dyn ChatBackend,
    config: &AuthorConfig,
    event: &Event,
    meta: &EventMeta,
    style_catalog: &BTreeMap<String, Vec<String>>,
    itermax: usize,
    book_seed: u64,
) -> Result<ChapterOutcome, BookError> {
    assert!(itermax >= 1);
    let adjectives = style_catalog
        .get(&meta.style)
        .cloned()
        .unwrap_or_default();
    let (system, user) = prompts::render_chapter_prompt(event, meta, &adjectives);
    let mut failures = Vec::new();
    for iteration in 0..itermax {
        // Distinct seed per (event, iteration) so replay caching never
        // resurfaces a failed candidate on retry.
        let request_seed = subseed(
            book_seed,
            &format!("chapter/{}", event.index),
            iteration as u64,
        );
        let text = backend.chat(&ChatRequest {
            provider_id: config.author.provider_id.clone(),
            model: config.author.model.clone(),
            system_prompt: system.clone(),
            user_prompt: user.clone(),
            max_output_tokens: config.max_output_tokens,
            temperature: config.temperature,
            seed: Some(request_seed),
        })?;
        let report = verifier::verify_structure(&text, event, meta);
        if !report.passed {
            failures.push(format!(
                "iteration {iteration}: structural failure ({:?})",
                report.violations.iter().map(|v| v.rule_id).collect::<Vec<_>>()
            ));
            continue;
        }
        let verdict = match verifier::verify_semantics(
            backend,
            &config.verifier_judge,
            &text,
            Some(request_seed),
        ) {
            Ok(v) => v,
            Err(VerifierError::VerdictUnparseable(msg)) => {
                failures.push(format!("iteration {iteration}: unparseable verdict ({msg})"));
                continue;
            }
            Err(VerifierError::Gateway(e)) => return Err(e.into()),
            Err(e) => {
                failures.push(format!("iteration {iteration}: {e}"));
                continue;
            }
        };
        if !verdict.valid() {
            failures.push(format!(
                "iteration {iteration}: semantic failure (answers {:?})",
                verdict.answers
            ));
            continue;
        }
        let paragraphs = verifier::parse_paragraphs(&text).expect("structural pass implies parse");
        return Ok(ChapterOutcome::Accepted(ChapterDraft {
            event_index: event.index,
            iteration,
            raw_text: text,
            paragraphs,
        }));
    }
    Ok(ChapterOutcome::Discarded {
        event_index: event.index,
        failures,
    })
}

/// Build the seeded pool of secondary full names, disjoint from the primary
/// name lists and capped at 100000 entries.
pub fn build_secondary_pool(corpus: &SeedCorpus, seed: u64) -> Vec<String> {
    let mut pool: Vec<String> = Vec::with_capacity(100_000);
    for first in &corpus.secondary_first_names {
        for last in &corpus.secondary_last_names {
            if pool.len() == 100_000 {
                break;
            }
            pool.push(format!("{first} {last}"));
        }
    }
    let mut rng = crate::seed::sub_rng(seed, "secondary-pool", 0);
    pool.shuffle(&mut rng);
    pool
}

fn placeholder_regex() -> Regex {
    Regex::new(r"\$entity_([0-9]+)").unwrap()
}

fn name_is_safe(name: &str, universe: &Universe) -> bool {
    let lists = [
        &universe.temporal,
        &universe.spatial,
        &universe.entities,
        &universe.contents,
    ];
    lists
        .iter()
        .all(|list| list.iter().all(|item| !name.contains(item.as_str()) && !item.contains(name)))
}

/// Replace every `$entity_X` placeholder with a fresh full name.
///
/// The same placeholder maps to the same name within the chapter; every
/// assigned name is globally fresh (tracked in `used`) and never contains
/// or is contained in any universe string.
pub fn fill_secondary_entities(
    text: &str,
    pool: &[String],
    pool_cursor: &mut usize,
    used: &mut HashSet<String>,
    universe: &Universe,
) -> Result<(String, BTreeMap<String, String>), BookError> {
    let re = placeholder_regex();
    let mut assignments: BTreeMap<String, String> = BTreeMap::new();
    for caps in re.captures_iter(text) {
        let placeholder = caps[0].to_string();
        if assignments.contains_key(&placeholder) {
            continue;
        }
        let name = loop {
            let candidate = pool.get(*pool_cursor).ok_or(BookError::PoolExhausted)?;
            *pool_cursor += 1;
            if !used.contains(candidate) && name_is_safe(candidate, universe) {
                break candidate.clone();
            }
        };
        used.insert(name.clone());
        assignments.insert(placeholder, name);
    }
    let filled = re
        .replace_all(text, |caps: &regex::Captures| {
            assignments[&caps[0]].clone()
        })
        .into_owned();
    Ok((filled, assignments))
}

/// One accepted chapter of the final book.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BookChapter {
    /// 1-based position among accepted chapters.
    pub chapter_number: usize,
    pub event_index: usize,
    /// Chapter text after secondary-name substitution.
    pub text: String,
    pub paragraph_count: usize,
    /// Secondary names in placeholder order.
    pub secondary_names: Vec<String>,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Book {
    pub chapters: Vec<BookChapter>,
    pub discarded_events: Vec<usize>,
    pub assembled_text: String,
}

/// Concatenate chapter texts into the final document format.
pub fn assemble_text(chapter_texts: &[String]) -> Result<String, BookError> {
    if chapter_texts.is_empty() {
        return Err(BookError::EmptyBook);
    }
    let mut out = String::new();
    for (i, text) in chapter_texts.iter().enumerate() {
        out.push_str(&format!("Chapter {}\n\n{}\n\n\n", i + 1, text));
    }
    Ok(out)
}

/// Generate the whole book: parallel chapter loops, serialized secondary
/// naming, then assembly.
///
/// `ordered` re-sorts accepted chapters by event date before numbering and
/// assembly; the default keeps event order.
#[allow(clippy::too_many_arguments)]
pub fn build_book(
    backend: &(dyn ChatBackend + Sync),
    config: &AuthorConfig,
    events: &[Event],
    metas: &[EventMeta],
    corpus: &SeedCorpus,
    universe: &Universe,
    itermax: usize,
    seed: u64,
    ordered: bool,
) -> Result<Book, BookError> {
    assert_eq!(events.len(), metas.len());
    let outcomes: Vec<Result<ChapterOutcome, BookError>> = events
        .par_iter()
        .zip(metas.par_iter())
        .map(|(event, meta)| {
            generate_chapter(backend, config, event, meta, &corpus.style_catalog, itermax, seed)
        })
        .collect();

    let mut accepted: Vec<ChapterDraft> = Vec::new();
    let mut discarded_events = Vec::new();
    for outcome in outcomes {
        match outcome? {
            ChapterOutcome::Accepted(draft) => accepted.push(draft),
            ChapterOutcome::Discarded { event_index, .. } => discarded_events.push(event_index),
        }
    }
    accepted.sort_by_key(|d| d.event_index);
    if ordered {
        accepted.sort_by_key(|d| {
            let event = &events[d.event_index];
            (parse_date(&event.t), d.event_index)
        });
    }

    let pool = build_secondary_pool(corpus, seed);
    let mut cursor = 0;
    let mut used = HashSet::new();
    let mut chapters = Vec::with_capacity(accepted.len());
    let mut texts = Vec::with_capacity(accepted.len());
    for (pos, draft) in accepted.iter().enumerate() {
        let (text, assignments) =
            fill_secondary_entities(&draft.raw_text, &pool, &mut cursor, &mut used, universe)?;
        texts.push(text.clone());
        chapters.push(BookChapter {
            chapter_number: pos + 1,
            event_index: draft.event_index,
            paragraph_count: draft.paragraphs.len(),
            secondary_names: assignments.into_values().collect(),
            iterations_used: draft.iteration + 1,
            text,
        });
    }
    let assembled_text = assemble_text(&texts)?;
    Ok(Book {
        chapters,
        discarded_events,
        assembled_text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::universe::{build_universe, load_corpus};

    fn fixtures() -> (SeedCorpus, Universe) {
        let corpus = load_corpus(crate::universe::bundled_corpus_path("city_life")).unwrap();
        let universe = build_universe(&corpus, 100, 17).unwrap();
        (corpus, universe)
    }

    #[test]
    fn assemble_matches_exact_format() {
        let out = assemble_text(&["A".to_string(), "B".to_string()]).unwrap();
        assert_eq!(out, "Chapter 1\n\nA\n\n\nChapter 2\n\nB\n\n\n");
        let one = assemble_text(&["only".to_string()]).unwrap();
        assert_eq!(one.matches("Chapter ").count(), 1);
        assert!(matches!(assemble_text(&[]), Err(BookError::EmptyBook)));
    }

    #[test]
    fn same_placeholder_gets_same_name() {
        let (corpus, universe) = fixtures();
        let pool = build_secondary_pool(&corpus, 1);
        let mut cursor = 0;
        let mut used = HashSet::new();
        let (filled, assignments) = fill_secondary_entities(
            "$entity_5 waved. Later $entity_5 spoke with $entity_2.",
            &pool,
            &mut cursor,
            &mut used,
            &universe,
        )
        .unwrap();
        assert_eq!(assignments.len(), 2);
        let name5 = &assignments["$entity_5"];
        let name2 = &assignments["$entity_2"];
        assert_ne!(name5, name2);
        assert_eq!(filled, format!("{name5} waved. Later {name5} spoke with {name2}."));
    }

    #[test]
    fn names_are_globally_unique_across_calls() {
        let (corpus, universe) = fixtures();
        let pool = build_secondary_pool(&corpus, 1);
        let mut cursor = 0;
        let mut used = HashSet::new();
        let mut all_names = Vec::new();
        for _ in 0..50 {
            let (_, assignments) = fill_secondary_entities(
                "$entity_1 met $entity_2.",
                &pool,
                &mut cursor,
                &mut used,
                &universe,
            )
            .unwrap();
            all_names.extend(assignments.into_values());
        }
        let set: HashSet<_> = all_names.iter().collect();
        assert_eq!(set.len(), all_names.len());
        for name in &all_names {
            assert!(!universe.entities.contains(name));
        }
    }

    #[test]
    fn no_placeholders_leaves_text_unchanged() {
        let (corpus, universe) = fixtures();
        let pool = build_secondary_pool(&corpus, 1);
        let mut cursor = 0;
        let mut used = HashSet::new();
        let (filled, assignments) =
            fill_secondary_entities("Nothing here.", &pool, &mut cursor, &mut used, &universe)
                .unwrap();
        assert_eq!(filled, "Nothing here.");
        assert!(assignments.is_empty());
    }

    #[test]
    fn secondary_pool_is_capped_and_unique() {
        let (corpus, _) = fixtures();
        let pool = build_secondary_pool(&corpus, 2);
        assert_eq!(pool.len(), 100_000);
        let set: HashSet<_> = pool.iter().collect();
        assert_eq!(set.len(), pool.len());
        assert_eq!(pool, build_secondary_pool(&corpus, 2));
    }

    #[test]
    fn multi_digit_placeholders_do_not_collide() {
        let (corpus, universe) = fixtures();
        let pool = build_secondary_pool(&corpus, 1);
        let mut cursor = 0;
        let mut used = HashSet::new();
        let (filled, assignments) = fill_secondary_entities(
            "$entity_1 and $entity_12 arrived.",
            &pool,
            &mut cursor,
            &mut used,
            &universe,
        )
        .unwrap();
        assert_eq!(assignments.len(), 2);
        assert!(!filled.contains("$entity"));
    }
}
