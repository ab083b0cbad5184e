//! Question synthesis with controlled ground truth.
//!
//! The 36 bundled question templates pair a cue (a partial event tuple)
//! with a trace kind and a get-mode. Questions are instantiated from every
//! accepted chapter, empty-answer questions are synthesized by corrupting
//! chapter tuples (inner: values from other chapters; outer: unused
//! universe items), the corpus is binned by matching-event count and
//! balanced per (template, bin) cell, and bin-1 questions export as a
//! fine-tuning dataset.

use crate::bookgen::{Book, BookChapter};
use crate::eventgen::{bin_label, Event};
use crate::prompts;
use crate::seed::sub_rng;
use crate::universe::{parse_date, Universe};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QagenError {
    #[error("template table invalid: {0}")]
    TemplateInvalid(String),
    #[error("two matching events share the maximum date '{0}'")]
    AmbiguousLatest(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// One slot of the event tuple usable as a cue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CueSlot {
    #[serde(rename = "t")]
    T,
    #[serde(rename = "s")]
    S,
    #[serde(rename = "ent")]
    Ent,
    #[serde(rename = "c")]
    C,
}

/// The information type extracted from each matching event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trace {
    Times,
    Spaces,
    Entities,
    Contents,
    OtherEntities,
    FullDetails,
}

impl Trace {
    /// The "Question type" string shown to the scoring judge.
    pub fn retrieval_type(self) -> &'static str {
        match self {
            Trace::Times => "Times",
            Trace::Spaces => "Spaces",
            Trace::Entities => "Entities",
            Trace::Contents => "Contents",
            Trace::OtherEntities => "OtherEntities",
            Trace::FullDetails => "FullDetails",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GetMode {
    All,
    Latest,
    Chrono,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionTemplate {
    pub id: usize,
    pub cue: Vec<CueSlot>,
    pub trace: Trace,
    pub get: GetMode,
    pub text: String,
}

/// Load and validate the bundled 36-row template table.
pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<QuestionTemplate>, QagenError> {
    let text = std::fs::read_to_string(path)?;
    let templates: Vec<QuestionTemplate> = serde_json::from_str(&text)?;
    if templates.len() != 36 {
        return Err(QagenError::TemplateInvalid(format!(
            "expected 36 templates, found {}",
            templates.len()
        )));
    }
    for (i, template) in templates.iter().enumerate() {
        if template.id != i {
            return Err(QagenError::TemplateInvalid(format!(
                "template at position {i} has id {}",
                template.id
            )));
        }
        if template.cue.is_empty() {
            return Err(QagenError::TemplateInvalid(format!("template {i} has empty cue")));
        }
        if (30..=35).contains(&template.id) && template.cue != vec![CueSlot::Ent] {
            return Err(QagenError::TemplateInvalid(format!(
                "template {} must have cue [ent]",
                template.id
            )));
        }
        for slot in &template.cue {
            let placeholder = match slot {
                CueSlot::T => "{t}",
                CueSlot::S => "{s}",
                CueSlot::Ent => "{ent}",
                CueSlot::C => "{c}",
            };
            if !template.text.contains(placeholder) {
                return Err(QagenError::TemplateInvalid(format!(
                    "template {} text lacks slot {placeholder}",
                    template.id
                )));
            }
        }
    }
    Ok(templates)
}

/// Path of the bundled template table.
pub fn bundled_templates_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("templates.json")
}

/// A partial event tuple with concrete values in the filled slots.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cue {
    pub t: Option<String>,
    pub s: Option<String>,
    pub ent: Option<String>,
    pub c: Option<String>,
}

impl Cue {
    /// Project the slots named by `mask` out of a full tuple.
    pub fn from_event(event: &Event, mask: &[CueSlot]) -> Self {
        let mut cue = Cue::default();
        for slot in mask {
            match slot {
                CueSlot::T => cue.t = Some(event.t.clone()),
                CueSlot::S => cue.s = Some(event.s.clone()),
                CueSlot::Ent => cue.ent = Some(event.ent.clone()),
                CueSlot::C => cue.c = Some(event.c.clone()),
            }
        }
        cue
    }

    pub fn matches(&self, event: &Event) -> bool {
        self.t.as_ref().map_or(true, |t| *t == event.t)
            && self.s.as_ref().map_or(true, |s| *s == event.s)
            && self.ent.as_ref().map_or(true, |e| *e == event.ent)
            && self.c.as_ref().map_or(true, |c| *c == event.c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GroundTruth {
    /// Unordered unique values (get-mode all).
    ValueSet(Vec<String>),
    /// Trace value of the maximum-date matching event.
    LatestValue(String),
    /// Per-event trace values ascending by date, duplicates retained.
    ChronoSequence(Vec<String>),
    /// Verbatim chapter text (FullDetails trace with a single match).
    FullChapter(String),
    Empty,
}

impl GroundTruth {
    /// The ground truth as the item list shown to the judge.
    pub fn items(&self) -> Vec<String> {
        match self {
            GroundTruth::ValueSet(v) | GroundTruth::ChronoSequence(v) => v.clone(),
            GroundTruth::LatestValue(v) => vec![v.clone()],
            GroundTruth::FullChapter(text) => vec![text.clone()],
            GroundTruth::Empty => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    Nonempty,
    EmptyInner,
    EmptyOuter,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Question {
    pub qid: String,
    pub template_id: usize,
    pub cue: Cue,
    pub kind: QuestionKind,
    pub matching_event_indices: Vec<usize>,
    /// Bin label from {"0", "1", "2", "3-5", "6+"}.
    pub bin: String,
    pub question_text: String,
    pub ground_truth: GroundTruth,
    pub trace: Trace,
    pub get: GetMode,
}

/// Indices of events agreeing with every filled cue slot, by linear scan.
pub fn matching_events(cue: &Cue, events: &[Event]) -> Vec<usize> {
    events
        .iter()
        .filter(|e| cue.matches(e))
        .map(|e| e.index)
        .collect()
}

fn chapter_by_event(book: &Book) -> HashMap<usize, &BookChapter> {
    book.chapters.iter().map(|c| (c.event_index, c)).collect()
}

fn trace_value(event: &Event, trace: Trace, chapters: &HashMap<usize, &BookChapter>) -> Vec<String> {
    match trace {
        Trace::Times => vec![event.t.clone()],
        Trace::Spaces => vec![event.s.clone()],
        Trace::Entities => vec![event.ent.clone()],
        Trace::Contents => vec![event.c.clone()],
        Trace::OtherEntities => chapters
            .get(&event.index)
            .map(|c| c.secondary_names.clone())
            .unwrap_or_default(),
        Trace::FullDetails => chapters
            .get(&event.index)
            .map(|c| vec![c.text.clone()])
            .unwrap_or_default(),
    }
}

fn dedup_preserving_order(values: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    values.into_iter().filter(|v| seen.insert(v.clone())).collect()
}

/// Compute the controlled answer for a cue under a trace and get-mode.
pub fn compute_ground_truth(
    cue: &Cue,
    trace: Trace,
    get: GetMode,
    events: &[Event],
    book: &Book,
) -> Result<GroundTruth, QagenError> {
    let chapters = chapter_by_event(book);
    let matching: Vec<&Event> = events.iter().filter(|e| cue.matches(e)).collect();
    if matching.is_empty() {
        return Ok(GroundTruth::Empty);
    }
    match get {
        GetMode::All => {
            if trace == Trace::FullDetails && matching.len() == 1 {
                let values = trace_value(matching[0], trace, &chapters);
                return Ok(match values.into_iter().next() {
                    Some(text) => GroundTruth::FullChapter(text),
                    None => GroundTruth::Empty,
                });
            }
            let values: Vec<String> = matching
                .iter()
                .flat_map(|e| trace_value(e, trace, &chapters))
                .collect();
            Ok(GroundTruth::ValueSet(dedup_preserving_order(values)))
        }
        GetMode::Latest => {
            let mut best: Option<&Event> = None;
            for event in &matching {
                let date = parse_date(&event.t);
                match best {
                    None => best = Some(event),
                    Some(current) => {
                        let current_date = parse_date(&current.t);
                        if date > current_date {
                            best = Some(event);
                        } else if date == current_date {
                            return Err(QagenError::AmbiguousLatest(event.t.clone()));
                        }
                    }
                }
            }
            let best = best.expect("matching non-empty");
            let value = trace_value(best, trace, &chapters).join("\n");
            Ok(GroundTruth::LatestValue(value))
        }
        GetMode::Chrono => {
            let mut ordered = matching.clone();
            ordered.sort_by_key(|e| (parse_date(&e.t), e.index));
            let values: Vec<String> = ordered
                .iter()
                .flat_map(|e| trace_value(e, trace, &chapters))
                .collect();
            Ok(GroundTruth::ChronoSequence(values))
        }
    }
}

fn fill_template(text: &str, cue: &Cue) -> String {
    let mut out = text.to_string();
    if let Some(t) = &cue.t {
        out = out.replace("{t}", t);
    }
    if let Some(s) = &cue.s {
        out = out.replace("{s}", s);
    }
    if let Some(ent) = &cue.ent {
        out = out.replace("{ent}", ent);
    }
    if let Some(c) = &cue.c {
        out = out.replace("{c}", c);
    }
    out
}

fn question_id(template_id: usize, cue: &Cue, kind: QuestionKind) -> String {
    let mut hasher = Sha256::new();
    hasher.update(template_id.to_le_bytes());
    hasher.update(serde_json::to_string(cue).unwrap().as_bytes());
    hasher.update(format!("{kind:?}").as_bytes());
    hex::encode(&hasher.finalize()[..16])
}

fn build_question(
    template: &QuestionTemplate,
    cue: Cue,
    kind: QuestionKind,
    events: &[Event],
    book: &Book,
) -> Result<Question, QagenError> {
    let matching = matching_events(&cue, events);
    let ground_truth = compute_ground_truth(&cue, template.trace, template.get, events, book)?;
    Ok(Question {
        qid: question_id(template.id, &cue, kind),
        template_id: template.id,
        question_text: fill_template(&template.text, &cue),
        bin: bin_label(matching.len()).to_string(),
        matching_event_indices: matching,
        cue,
        kind,
        ground_truth,
        trace: template.trace,
        get: template.get,
    })
}

/// Instantiate all templates from every accepted chapter, deduplicating
/// identical question texts.
pub fn instantiate_questions(
    events: &[Event],
    book: &Book,
    templates: &[QuestionTemplate],
) -> Result<Vec<Question>, QagenError> {
    let mut questions = Vec::new();
    let mut seen_texts = HashSet::new();
    for chapter in &book.chapters {
        let event = &events[chapter.event_index];
        for template in templates {
            let cue = Cue::from_event(event, &template.cue);
            let question = build_question(template, cue, QuestionKind::Nonempty, events, book)?;
            if seen_texts.insert(question.question_text.clone()) {
                questions.push(question);
            }
        }
    }
    Ok(questions)
}

fn used_values(events: &[Event]) -> [HashSet<&str>; 4] {
    let mut t = HashSet::new();
    let mut s = HashSet::new();
    let mut ent = HashSet::new();
    let mut c = HashSet::new();
    for e in events {
        t.insert(e.t.as_str());
        s.insert(e.s.as_str());
        ent.insert(e.ent.as_str());
        c.insert(e.c.as_str());
    }
    [t, s, ent, c]
}

/// Synthesize zero-answer questions by corrupting each chapter's tuple.
///
/// For each chapter and each strategy (inner, outer) one corrupted tuple is
/// drawn: an i.i.d. Bernoulli(1/2) mask selects slots to replace, inner
/// replacements come from other chapters' events and outer replacements
/// from universe items no event uses. All templates are instantiated with
/// the corrupted tuple and only questions matching zero events are kept.
pub fn generate_empty_questions(
    events: &[Event],
    universe: &Universe,
    book: &Book,
    templates: &[QuestionTemplate],
    seed: u64,
) -> Result<Vec<Question>, QagenError> {
    let [used_t, used_s, used_ent, used_c] = used_values(events);
    let unused =
        |pool: &[String], used: &HashSet<&str>| -> Vec<String> {
            pool.iter().filter(|v| !used.contains(v.as_str())).cloned().collect()
        };
    let unused_pools = [
        unused(&universe.temporal, &used_t),
        unused(&universe.spatial, &used_s),
        unused(&universe.entities, &used_ent),
        unused(&universe.contents, &used_c),
    ];

    let mut questions = Vec::new();
    let mut seen_texts = HashSet::new();
    for chapter in &book.chapters {
        let source = &events[chapter.event_index];
        for (strategy, kind) in [("inner", QuestionKind::EmptyInner), ("outer", QuestionKind::EmptyOuter)] {
            let mut rng = sub_rng(seed, &format!("empty/{strategy}"), chapter.event_index as u64);
            let mask: [bool; 4] = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
            let mut tuple = [
                source.t.clone(),
                source.s.clone(),
                source.ent.clone(),
                source.c.clone(),
            ];
            for (slot, masked) in mask.into_iter().enumerate() {
                if !masked {
                    continue;
                }
                let replacement = if strategy == "inner" {
                    let candidates: Vec<&str> = events
                        .iter()
                        .filter(|e| e.index != source.index)
                        .map(|e| match slot {
                            0 => e.t.as_str(),
                            1 => e.s.as_str(),
                            2 => e.ent.as_str(),
                            _ => e.c.as_str(),
                        })
                        .filter(|v| *v != tuple[slot])
                        .collect();
                    candidates.choose(&mut rng).map(|v| v.to_string())
                } else {
                    unused_pools[slot].choose(&mut rng).cloned()
                };
                if let Some(value) = replacement {
                    tuple[slot] = value;
                }
            }
            let [t, s, ent, c] = tuple;
            let corrupted = Event {
                index: source.index,
                t,
                s,
                ent,
                c,
                d: source.d.clone(),
            };
            for template in templates {
                let cue = Cue::from_event(&corrupted, &template.cue);
                if !matching_events(&cue, events).is_empty() {
                    continue;
                }
                let question = build_question(template, cue, kind, events, book)?;
                debug_assert!(matches!(question.ground_truth, GroundTruth::Empty));
                if seen_texts.insert(question.question_text.clone()) {
                    questions.push(question);
                }
            }
        }
    }
    Ok(questions)
}

/// Balanced selection: at most `n_target` questions per (template_id, bin)
/// cell, sampled without replacement under the seed.
pub fn select_balanced(questions: &[Question], n_target: usize, seed: u64) -> Vec<Question> {
    let mut cells: BTreeMap<(usize, usize), Vec<&Question>> = BTreeMap::new();
    let bin_order = |bin: &str| crate::eventgen::BIN_LABELS.iter().position(|b| *b == bin).unwrap();
    for q in questions {
        cells.entry((q.template_id, bin_order(&q.bin))).or_default().push(q);
    }
    let mut selected = Vec::new();
    for ((template_id, bin_idx), mut cell) in cells {
        cell.sort_by(|a, b| a.qid.cmp(&b.qid));
        let mut rng = sub_rng(seed, "select", (template_id * 8 + bin_idx) as u64);
        cell.shuffle(&mut rng);
        selected.extend(cell.into_iter().take(n_target).cloned());
    }
    selected
}

/// Canonical rendering of a ground truth as an answer sentence.
pub fn render_answer(ground_truth: &GroundTruth) -> String {
    match ground_truth {
        GroundTruth::ValueSet(items) => {
            format!("The answer items are: {}.", items.join("; "))
        }
        GroundTruth::LatestValue(value) => format!("The latest is: {value}."),
        GroundTruth::ChronoSequence(items) => {
            format!("In chronological order: {}.", items.join("; "))
        }
        GroundTruth::FullChapter(text) => text.clone(),
        GroundTruth::Empty => {
            "There is no information about this in the book.".to_string()
        }
    }
}

/// One chat-format fine-tuning record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub system: String,
    pub user: String,
    pub assistant: String,
}

/// Export the bin-1 subset of the nonempty corpus as fine-tuning records.
pub fn export_finetune_dataset(questions: &[Question]) -> Vec<FinetuneRecord> {
    questions
        .iter()
        .filter(|q| q.kind == QuestionKind::Nonempty && q.bin == "1")
        .map(|q| FinetuneRecord {
            system: prompts::ANSWER_SYSTEM_PROMPT.to_string(),
            user: prompts::render_finetuned_prompt(&q.question_text),
            assistant: render_answer(&q.ground_truth),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bookgen::BookChapter;

    fn event(index: usize, t: &str, s: &str, ent: &str, c: &str) -> Event {
        Event {
            index,
            t: t.into(),
            s: s.into(),
            ent: ent.into(),
            c: c.into(),
            d: "did something".into(),
        }
    }

    fn small_book(events: &[Event]) -> Book {
        let chapters: Vec<BookChapter> = events
            .iter()
            .enumerate()
            .map(|(pos, e)| BookChapter {
                chapter_number: pos + 1,
                event_index: e.index,
                text: format!("chapter text {}", e.index),
                paragraph_count: 1,
                secondary_names: vec![format!("Sec A{}", e.index), format!("Sec B{}", e.index)],
                iterations_used: 1,
            })
            .collect();
        let texts: Vec<String> = chapters.iter().map(|c| c.text.clone()).collect();
        Book {
            chapters,
            discarded_events: Vec::new(),
            assembled_text: crate::bookgen::assemble_text(&texts).unwrap(),
        }
    }

    fn fixture() -> (Vec<Event>, Book) {
        let events = vec![
            event(0, "May 07, 2024", "Central Park", "Ada North", "Tech Hackathon"),
            event(1, "June 02, 2024", "Central Park", "Ben South", "Jazz Night"),
            event(2, "July 15, 2024", "High Line", "Ada North", "Jazz Night"),
        ];
        let book = small_book(&events);
        (events, book)
    }

    #[test]
    fn bundled_templates_validate_and_round_trip() {
        let templates = load_templates(bundled_templates_path()).unwrap();
        assert_eq!(templates.len(), 36);
        for t in templates.iter().skip(30) {
            assert_eq!(t.cue, vec![CueSlot::Ent]);
        }
        let serialized = serde_json::to_value(&templates).unwrap();
        let original: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(bundled_templates_path()).unwrap())
                .unwrap();
        assert_eq!(serialized, original);
    }

    #[test]
    fn ground_truth_all_deduplicates() {
        let (events, book) = fixture();
        let cue = Cue { s: Some("Central Park".into()), ..Default::default() };
        let gt = compute_ground_truth(&cue, Trace::Spaces, GetMode::All, &events, &book).unwrap();
        assert_eq!(gt, GroundTruth::ValueSet(vec!["Central Park".into()]));
        let gt = compute_ground_truth(&cue, Trace::Entities, GetMode::All, &events, &book).unwrap();
        assert_eq!(gt, GroundTruth::ValueSet(vec!["Ada North".into(), "Ben South".into()]));
    }

    #[test]
    fn ground_truth_latest_takes_max_date() {
        let (events, book) = fixture();
        let cue = Cue { ent: Some("Ada North".into()), ..Default::default() };
        let gt = compute_ground_truth(&cue, Trace::Spaces, GetMode::Latest, &events, &book).unwrap();
        assert_eq!(gt, GroundTruth::LatestValue("High Line".into()));
    }

    #[test]
    fn ground_truth_chrono_is_date_ordered_with_duplicates() {
        let (events, book) = fixture();
        let cue = Cue::default();
        let gt = compute_ground_truth(&cue, Trace::Contents, GetMode::Chrono, &events, &book).unwrap();
        assert_eq!(
            gt,
            GroundTruth::ChronoSequence(vec![
                "Tech Hackathon".into(),
                "Jazz Night".into(),
                "Jazz Night".into()
            ])
        );
    }

    #[test]
    fn ambiguous_latest_is_detected() {
        let (mut events, book) = fixture();
        events.push(event(3, "July 15, 2024", "Pier 17", "Cy West", "Jazz Night"));
        let cue = Cue { c: Some("Jazz Night".into()), ..Default::default() };
        assert!(matches!(
            compute_ground_truth(&cue, Trace::Spaces, GetMode::Latest, &events, &book),
            Err(QagenError::AmbiguousLatest(_))
        ));
    }

    #[test]
    fn zero_match_cue_is_empty() {
        let (events, book) = fixture();
        let cue = Cue { t: Some("January 01, 2025".into()), ..Default::default() };
        let gt = compute_ground_truth(&cue, Trace::Spaces, GetMode::All, &events, &book).unwrap();
        assert_eq!(gt, GroundTruth::Empty);
    }

    #[test]
    fn full_details_single_match_is_chapter_text() {
        let (events, book) = fixture();
        let cue = Cue {
            t: Some("May 07, 2024".into()),
            s: Some("Central Park".into()),
            ent: Some("Ada North".into()),
            c: Some("Tech Hackathon".into()),
        };
        let gt = compute_ground_truth(&cue, Trace::FullDetails, GetMode::All, &events, &book).unwrap();
        assert_eq!(gt, GroundTruth::FullChapter("chapter text 0".into()));
    }

    #[test]
    fn other_entities_union_secondary_names() {
        let (events, book) = fixture();
        let cue = Cue { ent: Some("Ada North".into()), ..Default::default() };
        let gt = compute_ground_truth(&cue, Trace::OtherEntities, GetMode::All, &events, &book).unwrap();
        assert_eq!(
            gt,
            GroundTruth::ValueSet(vec![
                "Sec A0".into(), "Sec B0".into(), "Sec A2".into(), "Sec B2".into()
            ])
        );
    }

    #[test]
    fn instantiation_dedups_and_counts() {
        let (events, book) = fixture();
        let templates = load_templates(bundled_templates_path()).unwrap();
        let questions = instantiate_questions(&events, &book, &templates).unwrap();
        // 3 chapters x 36 templates, minus duplicates from shared values.
        assert!(questions.len() <= 108);
        let texts: HashSet<_> = questions.iter().map(|q| &q.question_text).collect();
        assert_eq!(texts.len(), questions.len());
        for q in &questions {
            assert!(!q.question_text.contains('{'));
            assert_eq!(q.bin, bin_label(q.matching_event_indices.len()));
        }
    }

    #[test]
    fn empty_questions_match_zero_events() {
        let (events, book) = fixture();
        let templates = load_templates(bundled_templates_path()).unwrap();
        let universe = Universe {
            seed: 0,
            n_universe: 5,
            temporal: vec![
                "May 07, 2024".into(),
                "June 02, 2024".into(),
                "July 15, 2024".into(),
                "August 01, 2024".into(),
                "September 09, 2024".into(),
            ],
            spatial: vec![
                "Central Park".into(), "High Line".into(), "Pier 17".into(),
                "The Met".into(), "Bryant Park".into(),
            ],
            entities: vec![
                "Ada North".into(), "Ben South".into(), "Cy West".into(),
                "Dee East".into(), "Eli Stone".into(),
            ],
            contents: vec![
                "Tech Hackathon".into(), "Jazz Night".into(), "Book Fair".into(),
                "Chess Open".into(), "Food Expo".into(),
            ],
            content_details: BTreeMap::new(),
        };
        let empties = generate_empty_questions(&events, &universe, &book, &templates, 9).unwrap();
        assert!(!empties.is_empty());
        for q in &empties {
            assert!(q.matching_event_indices.is_empty());
            assert_eq!(q.ground_truth, GroundTruth::Empty);
            assert_eq!(q.bin, "0");
            assert!(matches!(q.kind, QuestionKind::EmptyInner | QuestionKind::EmptyOuter));
        }
    }

    #[test]
    fn selection_respects_cell_caps() {
        let (events, book) = fixture();
        let templates = load_templates(bundled_templates_path()).unwrap();
        let questions = instantiate_questions(&events, &book, &templates).unwrap();
        let selected = select_balanced(&questions, 1, 4);
        let mut per_cell: HashMap<(usize, String), usize> = HashMap::new();
        for q in &selected {
            *per_cell.entry((q.template_id, q.bin.clone())).or_insert(0) += 1;
        }
        assert!(per_cell.values().all(|&n| n <= 1));
        assert_eq!(
            select_balanced(&questions, 1, 4).len(),
            selected.len()
        );
    }

    #[test]
    fn finetune_export_keeps_only_bin_one() {
        let (events, book) = fixture();
        let templates = load_templates(bundled_templates_path()).unwrap();
        let questions = instantiate_questions(&events, &book, &templates).unwrap();
        let records = export_finetune_dataset(&questions);
        assert!(!records.is_empty());
        let bin1 = questions
            .iter()
            .filter(|q| q.bin == "1")
            .count();
        assert_eq!(records.len(), bin1);
        for record in &records {
            assert_eq!(record.system, "You are an expert in memory tests.");
            assert!(record.user.contains("Synaptic Echoes 2026"));
        }
    }

    #[test]
    fn rendered_answers_contain_items_verbatim() {
        let gt = GroundTruth::ValueSet(vec!["Central Park".into(), "High Line".into()]);
        let rendered = render_answer(&gt);
        assert!(rendered.contains("Central Park"));
        assert!(rendered.contains("High Line"));
    }
}
