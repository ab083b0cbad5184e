//! Seed corpora and construction of the static universe.
//!
//! A universe is the closed world every event is sampled from: N indexed
//! dates, locations, full-name entities and event contents, plus the detail
//! list attached to each content. Three corpora ship with the crate as JSON
//! data files (city life, world news, science fiction).

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use thiserror::Error;

/// Canonical date rendering used everywhere in the benchmark.
pub const DATE_FORMAT: &str = "%B %d, %Y";

/// Render a calendar date as "Month DD, YYYY" with a zero-padded day.
pub fn render_date(date: NaiveDate) -> String {
    date.format(DATE_FORMAT).to_string()
}

/// Parse a canonical "Month DD, YYYY" date string.
pub fn parse_date(text: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(text, DATE_FORMAT).ok()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

/// Raw materials a universe is built from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedCorpus {
    pub first_names: Vec<String>,
    pub last_names: Vec<String>,
    pub locations: Vec<String>,
    pub contents: Vec<String>,
    pub content_details: BTreeMap<String, Vec<String>>,
    pub style_catalog: BTreeMap<String, Vec<String>>,
    pub secondary_first_names: Vec<String>,
    pub secondary_last_names: Vec<String>,
    pub date_range: DateRange,
}

#[derive(Debug, Error)]
pub enum UniverseError {
    #[error("corpus invalid: {0}")]
    CorpusInvalid(String),
    #[error("insufficient corpus: {0}")]
    InsufficientCorpus(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

fn check_unique(name: &str, items: &[String]) -> Result<(), UniverseError> {
    let mut seen = HashSet::new();
    for item in items {
        if !seen.insert(item) {
            return Err(UniverseError::CorpusInvalid(format!(
                "duplicate {name} entry '{item}'"
            )));
        }
    }
    Ok(())
}

impl SeedCorpus {
    pub fn validate(&self) -> Result<(), UniverseError> {
        for (name, items, min) in [
            ("first_names", &self.first_names, 100),
            ("last_names", &self.last_names, 100),
            ("locations", &self.locations, 100),
            ("contents", &self.contents, 100),
            ("secondary_first_names", &self.secondary_first_names, 500),
            ("secondary_last_names", &self.secondary_last_names, 1000),
        ] {
            if items.len() < min {
                return Err(UniverseError::CorpusInvalid(format!(
                    "{name} has {} entries, need at least {min}",
                    items.len()
                )));
            }
            check_unique(name, items)?;
        }
        for content in &self.contents {
            match self.content_details.get(content).map(Vec::as_slice) {
                None | Some([]) => {
                    return Err(UniverseError::CorpusInvalid(format!(
                        "content '{content}' has no detail list"
                    )))
                }
                Some(details) => check_unique("content_details", details)?,
            }
        }
        if self.style_catalog.len() != 8
            || self.style_catalog.values().any(|adj| adj.len() != 3)
        {
            return Err(UniverseError::CorpusInvalid(
                "style_catalog must have 8 styles with 3 adjectives each".into(),
            ));
        }
        if self.date_range.start >= self.date_range.end {
            return Err(UniverseError::CorpusInvalid(
                "date_range start must precede end".into(),
            ));
        }
        Ok(())
    }
}

/// Load and validate a corpus JSON file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<SeedCorpus, UniverseError> {
    let text = std::fs::read_to_string(path)?;
    let corpus: SeedCorpus = serde_json::from_str(&text)?;
    corpus.validate()?;
    Ok(corpus)
}

/// The closed world of the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Universe {
    pub seed: u64,
    pub n_universe: usize,
    pub temporal: Vec<String>,
    pub spatial: Vec<String>,
    pub entities: Vec<String>,
    pub contents: Vec<String>,
    pub content_details: BTreeMap<String, Vec<String>>,
}

/// Build the universe deterministically from a corpus and a seed.
///
/// Dates are sampled without replacement from the calendar range and
/// rendered canonically; entities are first+last pairs resampled on full
/// name collision; locations and contents are seeded shuffles truncated to
/// `n_universe`.
pub fn build_universe(
    corpus: &SeedCorpus,
    n_universe: usize,
    seed: u64,
) -> Result<Universe, UniverseError> {
    corpus.validate()?;
    if n_universe == 0 {
        return Err(UniverseError::InsufficientCorpus(
            "n_universe must be positive".into(),
        ));
    }
    let span = (corpus.date_range.end - corpus.date_range.start).num_days() as usize + 1;
    if n_universe > span {
        return Err(UniverseError::InsufficientCorpus(format!(
            "date range spans {span} days, need {n_universe}"
        )));
    }
    if n_universe > corpus.locations.len() || n_universe > corpus.contents.len() {
        return Err(UniverseError::InsufficientCorpus(
            "corpus lists shorter than n_universe".into(),
        ));
    }
    if n_universe > corpus.first_names.len() * corpus.last_names.len() {
        return Err(UniverseError::InsufficientCorpus(
            "not enough first/last name combinations".into(),
        ));
    }

    let mut rng = crate::seed::rng_from(seed);

    let mut day_offsets: Vec<i64> = (0..span as i64).collect();
    day_offsets.shuffle(&mut rng);
    let mut temporal: Vec<String> = day_offsets[..n_universe]
        .iter()
        .map(|&off| render_date(corpus.date_range.start + chrono::Duration::days(off)))
        .collect();
    temporal.sort_by_key(|t| parse_date(t).expect("rendered date parses"));

    let mut entities = Vec::with_capacity(n_universe);
    let mut seen = HashSet::new();
    let max_attempts = 10 * n_universe.max(10);
    let mut attempts = 0;
    while entities.len() < n_universe {
        attempts += 1;
        if attempts > max_attempts {
            return Err(UniverseError::InsufficientCorpus(
                "could not sample enough distinct full names".into(),
            ));
        }
        let first = &corpus.first_names[rng.gen_range(0..corpus.first_names.len())];
        let last = &corpus.last_names[rng.gen_range(0..corpus.last_names.len())];
        let full = format!("{first} {last}");
        if seen.insert(full.clone()) {
            entities.push(full);
        }
    }

    let mut spatial = corpus.locations.clone();
    spatial.shuffle(&mut rng);
    spatial.truncate(n_universe);

    let mut contents = corpus.contents.clone();
    contents.shuffle(&mut rng);
    contents.truncate(n_universe);

    let content_details = contents
        .iter()
        .map(|c| (c.clone(), corpus.content_details[c].clone()))
        .collect();

    Ok(Universe {
        seed,
        n_universe,
        temporal,
        spatial,
        entities,
        contents,
        content_details,
    })
}

/// Path of a bundled corpus by short name ("city_life", "world_news", "sci_fi").
pub fn bundled_corpus_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(format!("corpus_{name}.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> SeedCorpus {
        load_corpus(bundled_corpus_path("city_life")).unwrap()
    }

    #[test]
    fn bundled_corpora_load_with_enough_locations() {
        for name in ["city_life", "world_news", "sci_fi"] {
            let c = load_corpus(bundled_corpus_path(name)).unwrap();
            assert!(c.locations.len() >= 100, "{name} locations");
        }
    }

    #[test]
    fn duplicated_location_is_rejected() {
        let mut c = corpus();
        let dup = c.locations[0].clone();
        c.locations.push(dup);
        match c.validate() {
            Err(UniverseError::CorpusInvalid(msg)) => assert!(msg.contains("locations")),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn content_without_details_is_rejected() {
        let mut c = corpus();
        c.content_details.remove(&c.contents[0].clone());
        assert!(matches!(c.validate(), Err(UniverseError::CorpusInvalid(_))));
    }

    #[test]
    fn same_seed_gives_identical_universe() {
        let c = corpus();
        let a = build_universe(&c, 100, 42).unwrap();
        let b = build_universe(&c, 100, 42).unwrap();
        assert_eq!(a, b);
        let other = build_universe(&c, 100, 43).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn universe_lists_are_duplicate_free_for_many_seeds() {
        let c = corpus();
        for seed in 0..100 {
            let u = build_universe(&c, 100, seed).unwrap();
            for list in [&u.temporal, &u.spatial, &u.entities, &u.contents] {
                assert_eq!(list.len(), 100);
                let set: HashSet<_> = list.iter().collect();
                assert_eq!(set.len(), 100, "duplicates at seed {seed}");
            }
        }
    }

    #[test]
    fn dates_render_canonically_and_round_trip() {
        let c = corpus();
        let u = build_universe(&c, 100, 7).unwrap();
        for t in &u.temporal {
            let parsed = parse_date(t).expect("parses");
            assert_eq!(render_date(parsed), *t);
            assert!(parsed >= c.date_range.start && parsed <= c.date_range.end);
        }
        assert_eq!(render_date(NaiveDate::from_ymd_opt(2024, 5, 7).unwrap()), "May 07, 2024");
    }

    #[test]
    fn singleton_universe_works() {
        let u = build_universe(&corpus(), 1, 0).unwrap();
        assert_eq!(u.temporal.len(), 1);
        assert_eq!(u.entities.len(), 1);
    }

    #[test]
    fn entities_come_from_corpus_name_lists() {
        let c = corpus();
        let u = build_universe(&c, 100, 3).unwrap();
        for ent in &u.entities {
            let (first, last) = ent.split_once(' ').unwrap();
            assert!(c.first_names.iter().any(|f| f == first));
            assert!(c.last_names.iter().any(|l| l == last));
        }
    }
}
