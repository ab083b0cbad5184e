//! Stage-by-stage pipeline orchestration with persisted artifacts.
//!
//! Stages run in a fixed order (universe, events, book, questions, answer,
//! judge, report), each reading the previous stage's files and writing its
//! own atomically (temp file plus rename). A content-hash manifest lets
//! unchanged stages be skipped on re-runs. The mock flag wires in the
//! offline author, judges and answerer so the whole pipeline runs with no
//! network access.

use crate::bookgen::{self, AuthorConfig, Book};
use crate::eventgen::{self, Event, EventMeta, GeometricParams};
use crate::evaluator::{self, JudgeVerdict, ScoreRecord};
use crate::gateway::{ChatBackend, EmbedBackend, Gateway, HttpProvider, ModelSpec, ReplayCache, RetryPolicy};
use crate::harness::{self, AnswerContext, AnswerRecord, MemoryMode};
use crate::mock::{AnswerBehavior, DeterministicJudgeBackend, HashEmbedBackend, MockAnswerBackend, MockBookBackend};
use crate::qagen::{self, GetMode, GroundTruth, Question};
use crate::report::{self, GroupBy, ScoredQuestion};
use crate::universe::{self, Universe};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config invalid: {0}")]
    ConfigInvalid(String),
    #[error("missing upstream artifact for stage '{stage}': {path}")]
    MissingUpstream { stage: String, path: String },
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: anyhow::Error,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

fn default_n_universe() -> usize { 100 }
fn default_geometric_p() -> f64 { 0.1 }
fn default_itermax() -> usize { 10 }
fn default_n_target() -> usize { 5 }
fn default_corpus() -> String { "city_life".to_string() }
fn default_memory_mode() -> MemoryMode { MemoryMode::InContext }
fn default_mock_spec() -> ModelSpec { ModelSpec::new("mock", "mock") }
fn default_true() -> bool { true }
fn default_behavior() -> String { "replay".to_string() }

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default = "default_n_universe")]
    pub n_universe: usize,
    pub n_events: usize,
    #[serde(default = "default_geometric_p")]
    pub geometric_p: f64,
    #[serde(default = "default_itermax")]
    pub itermax: usize,
    #[serde(default = "default_n_target")]
    pub n_target: usize,
    /// Bundled corpus short name or a path to a corpus JSON file.
    #[serde(default = "default_corpus")]
    pub corpus: String,
    #[serde(default)]
    pub ordered_book: bool,
    #[serde(default)]
    pub mock: bool,
    /// Mock author compliance; false makes every chapter fail and be
    /// discarded after itermax attempts.
    #[serde(default = "default_true")]
    pub mock_author_compliant: bool,
    /// Mock answerer behavior: replay, abstain or fabricate.
    #[serde(default = "default_behavior")]
    pub mock_answer_behavior: String,
    #[serde(default = "default_mock_spec")]
    pub author: ModelSpec,
    #[serde(default = "default_mock_spec")]
    pub verifier_judge: ModelSpec,
    #[serde(default = "default_mock_spec")]
    pub eval_judge: ModelSpec,
    #[serde(default = "default_mock_spec")]
    pub answerer: ModelSpec,
    #[serde(default = "default_mock_spec")]
    pub embedder: ModelSpec,
    #[serde(default = "default_memory_mode")]
    pub memory_mode: MemoryMode,
    /// provider_id -> API base URL for live runs.
    #[serde(default)]
    pub providers: BTreeMap<String, String>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.n_events == 0 {
            return Err(PipelineError::ConfigInvalid("n_events must be positive".into()));
        }
        if !(self.geometric_p > 0.0 && self.geometric_p < 1.0) {
            return Err(PipelineError::ConfigInvalid("geometric_p must be in (0, 1)".into()));
        }
        if self.itermax == 0 {
            return Err(PipelineError::ConfigInvalid("itermax must be at least 1".into()));
        }
        if !["replay", "abstain", "fabricate"].contains(&self.mock_answer_behavior.as_str()) {
            return Err(PipelineError::ConfigInvalid(format!(
                "unknown mock_answer_behavior '{}'",
                self.mock_answer_behavior
            )));
        }
        if let MemoryMode::Rag { top_k, .. } = &self.memory_mode {
            if *top_k == 0 {
                return Err(PipelineError::ConfigInvalid("rag top_k must be at least 1".into()));
            }
        }
        if !self.mock {
            for spec in [&self.author, &self.verifier_judge, &self.eval_judge, &self.answerer] {
                if !self.providers.contains_key(&spec.provider_id) {
                    return Err(PipelineError::ConfigInvalid(format!(
                        "provider '{}' not configured",
                        spec.provider_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    fn corpus_path(&self) -> PathBuf {
        let as_path = Path::new(&self.corpus);
        if as_path.exists() {
            as_path.to_path_buf()
        } else {
            universe::bundled_corpus_path(&self.corpus)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Universe,
    Events,
    Book,
    Questions,
    Answer,
    Judge,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Universe,
        Stage::Events,
        Stage::Book,
        Stage::Questions,
        Stage::Answer,
        Stage::Judge,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Universe => "universe",
            Stage::Events => "events",
            Stage::Book => "book",
            Stage::Questions => "questions",
            Stage::Answer => "answer",
            Stage::Judge => "judge",
            Stage::Report => "report",
        }
    }

    fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Universe => &["universe.json"],
            Stage::Events => &["events.json", "metaevents.json"],
            Stage::Book => &["book.json", "book.txt", "discards.json"],
            Stage::Questions => &["questions.jsonl", "finetune.jsonl"],
            Stage::Answer => &["answers.jsonl"],
            Stage::Judge => &["scores.jsonl"],
            Stage::Report => &["report.csv", "report.md", "tracking.csv"],
        }
    }

    fn inputs(self) -> &'static [&'static str] {
        match self {
            Stage::Universe => &[],
            Stage::Events => &["universe.json"],
            Stage::Book => &["events.json", "metaevents.json"],
            Stage::Questions => &["events.json", "book.json", "universe.json"],
            Stage::Answer => &["questions.jsonl", "book.json"],
            Stage::Judge => &["questions.jsonl", "answers.jsonl"],
            Stage::Report => &["questions.jsonl", "scores.jsonl"],
        }
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), PipelineError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn file_hash(path: &Path) -> Option<String> {
    let bytes = std::fs::read(path).ok()?;
    Some(hex::encode(Sha256::digest(&bytes)))
}

fn stage_fingerprint(stage: Stage, config: &PipelineConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(stage.name().as_bytes());
    hasher.update(serde_json::to_string(config).expect("config serializes"));
    for input in stage.inputs() {
        let path = config.output_dir.join(input);
        hasher.update(input.as_bytes());
        hasher.update(file_hash(&path).unwrap_or_default());
    }
    hex::encode(hasher.finalize())
}

type Manifest = BTreeMap<String, String>;

fn load_manifest(dir: &Path) -> Manifest {
    std::fs::read_to_string(dir.join("manifest.json"))
        .ok()
        .and_then(|text| serde_json::from_str(&text).ok())
        .unwrap_or_default()
}

fn save_manifest(dir: &Path, manifest: &Manifest) -> Result<(), PipelineError> {
    write_atomic(
        &dir.join("manifest.json"),
        &serde_json::to_string_pretty(manifest)?,
    )
}

/// Chat and embedding backends for every model role.
pub struct Backends {
    pub book: Arc<dyn ChatBackend + Sync + Send>,
    pub eval_judge: Arc<dyn ChatBackend + Sync + Send>,
    pub answerer: Arc<dyn ChatBackend + Sync + Send>,
    pub embedder: Arc<dyn EmbedBackend + Sync + Send>,
}

fn answer_behavior(config: &PipelineConfig) -> AnswerBehavior {
    match config.mock_answer_behavior.as_str() {
        "abstain" => AnswerBehavior::Abstain,
        "fabricate" => AnswerBehavior::Fabricate,
        _ => AnswerBehavior::Replay,
    }
}

fn build_live_gateway(config: &PipelineConfig) -> Result<Arc<Gateway>, PipelineError> {
    let mut gateway = Gateway::new(RetryPolicy::default(), 5.0);
    for (id, base_url) in &config.providers {
        gateway = gateway.with_provider(id, Arc::new(HttpProvider::new(id, base_url)));
    }
    if let Some(cache_dir) = &config.cache_dir {
        let cache = ReplayCache::new(cache_dir)
            .map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        gateway = gateway.with_cache(cache);
    }
    Ok(Arc::new(gateway))
}

impl Backends {
    /// Backends implied by the config: mocks when `mock` is set, otherwise
    /// a shared live gateway. The mock answerer replays the canonical
    /// ground-truth renderings registered from `questions`.
    pub fn for_config(
        config: &PipelineConfig,
        questions: &[Question],
    ) -> Result<Self, PipelineError> {
        if config.mock {
            let answers = questions
                .iter()
                .map(|q| (q.question_text.clone(), qagen::render_answer(&q.ground_truth)));
            Ok(Self {
                book: Arc::new(MockBookBackend {
                    compliant: config.mock_author_compliant,
                }),
                eval_judge: Arc::new(DeterministicJudgeBackend),
                answerer: Arc::new(
                    MockAnswerBackend::new(answer_behavior(config)).with_answers(answers),
                ),
                embedder: Arc::new(HashEmbedBackend::default()),
            })
        } else {
            let gateway = build_live_gateway(config)?;
            Ok(Self {
                book: gateway.clone(),
                eval_judge: gateway.clone(),
                answerer: gateway.clone(),
                embedder: gateway,
            })
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(
    stage: Stage,
    path: &Path,
) -> Result<T, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingUpstream {
            stage: stage.name().to_string(),
            path: path.display().to_string(),
        });
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(
    stage: Stage,
    path: &Path,
) -> Result<Vec<T>, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingUpstream {
            stage: stage.name().to_string(),
            path: path.display().to_string(),
        });
    }
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Into::into))
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// One line of scores.jsonl.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreLine {
    pub qid: String,
    pub mode: String,
    pub model: String,
    /// scored, unevaluated or unanswered.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<ScoreRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<JudgeVerdict>,
}

fn stage_err(stage: Stage, err: impl Into<anyhow::Error>) -> PipelineError {
    PipelineError::Stage {
        stage: stage.name().to_string(),
        source: err.into(),
    }
}

fn run_universe(config: &PipelineConfig) -> Result<(), PipelineError> {
    let corpus = universe::load_corpus(config.corpus_path())
        .map_err(|e| stage_err(Stage::Universe, e))?;
    let universe = universe::build_universe(&corpus, config.n_universe, config.seed)
        .map_err(|e| stage_err(Stage::Universe, e))?;
    write_atomic(
        &config.output_dir.join("universe.json"),
        &serde_json::to_string_pretty(&universe)?,
    )
}

fn run_events(config: &PipelineConfig) -> Result<(), PipelineError> {
    let universe: Universe = read_json(Stage::Events, &config.output_dir.join("universe.json"))?;
    let corpus = universe::load_corpus(config.corpus_path())
        .map_err(|e| stage_err(Stage::Events, e))?;
    let params = GeometricParams::new(config.geometric_p, universe.n_universe);
    let events = eventgen::generate_events(&universe, config.n_events, params, config.seed)
        .map_err(|e| stage_err(Stage::Events, e))?;
    let metas = eventgen::generate_meta(&events, &corpus.style_catalog, config.seed);
    write_atomic(
        &config.output_dir.join("events.json"),
        &serde_json::to_string_pretty(&events)?,
    )?;
    write_atomic(
        &config.output_dir.join("metaevents.json"),
        &serde_json::to_string_pretty(&metas)?,
    )
}

fn run_book(config: &PipelineConfig, backends: &Backends) -> Result<(), PipelineError> {
    let events: Vec<Event> = read_json(Stage::Book, &config.output_dir.join("events.json"))?;
    let metas: Vec<EventMeta> =
        read_json(Stage::Book, &config.output_dir.join("metaevents.json"))?;
    let universe: Universe = read_json(Stage::Book, &config.output_dir.join("universe.json"))?;
    let corpus = universe::load_corpus(config.corpus_path())
        .map_err(|e| stage_err(Stage::Book, e))?;
    let author_config = AuthorConfig::new(config.author.clone(), config.verifier_judge.clone());
    let book = bookgen::build_book(
        backends.book.as_ref(),
        &author_config,
        &events,
        &metas,
        &corpus,
        &universe,
        config.itermax,
        config.seed,
        config.ordered_book,
    )
    .map_err(|e| stage_err(Stage::Book, e))?;
    write_atomic(
        &config.output_dir.join("book.json"),
        &serde_json::to_string_pretty(&book.chapters)?,
    )?;
    write_atomic(&config.output_dir.join("book.txt"), &book.assembled_text)?;
    write_atomic(
        &config.output_dir.join("discards.json"),
        &serde_json::to_string_pretty(&book.discarded_events)?,
    )
}

fn load_book(stage: Stage, config: &PipelineConfig) -> Result<Book, PipelineError> {
    let chapters: Vec<bookgen::BookChapter> =
        read_json(stage, &config.output_dir.join("book.json"))?;
    let discarded: Vec<usize> = read_json(stage, &config.output_dir.join("discards.json"))?;
    let texts: Vec<String> = chapters.iter().map(|c| c.text.clone()).collect();
    let assembled_text = bookgen::assemble_text(&texts).map_err(|e| stage_err(stage, e))?;
    Ok(Book {
        chapters,
        discarded_events: discarded,
        assembled_text,
    })
}

fn run_questions(config: &PipelineConfig) -> Result<(), PipelineError> {
    let events: Vec<Event> = read_json(Stage::Questions, &config.output_dir.join("events.json"))?;
    let universe: Universe =
        read_json(Stage::Questions, &config.output_dir.join("universe.json"))?;
    let book = load_book(Stage::Questions, config)?;
    let templates = qagen::load_templates(qagen::bundled_templates_path())
        .map_err(|e| stage_err(Stage::Questions, e))?;
    let nonempty = qagen::instantiate_questions(&events, &book, &templates)
        .map_err(|e| stage_err(Stage::Questions, e))?;
    let empty = qagen::generate_empty_questions(&events, &universe, &book, &templates, config.seed)
        .map_err(|e| stage_err(Stage::Questions, e))?;
    let mut all = nonempty.clone();
    all.extend(empty);
    let selected = qagen::select_balanced(&all, config.n_target, config.seed);
    write_jsonl(&config.output_dir.join("questions.jsonl"), &selected)?;
    let finetune = qagen::export_finetune_dataset(&nonempty);
    write_jsonl(&config.output_dir.join("finetune.jsonl"), &finetune)
}

fn run_answer(config: &PipelineConfig, backends: &Backends) -> Result<(), PipelineError> {
    let questions: Vec<Question> =
        read_jsonl(Stage::Answer, &config.output_dir.join("questions.jsonl"))?;
    let book = load_book(Stage::Answer, config)?;
    let ctx = AnswerContext {
        chat: backends.answerer.as_ref(),
        embed: backends.embedder.as_ref(),
        answerer: config.answerer.clone(),
        embedder: config.embedder.clone(),
        max_output_tokens: 2048,
        temperature: 0.0,
    };
    let mut chunks = Vec::new();
    if let MemoryMode::Rag { granularity, .. } = &config.memory_mode {
        chunks = harness::chunk_book(&book, *granularity).map_err(|e| stage_err(Stage::Answer, e))?;
        harness::embed_chunks(backends.embedder.as_ref(), &config.embedder, &mut chunks)
            .map_err(|e| stage_err(Stage::Answer, e))?;
    }
    let mode_label = config.memory_mode.label();
    let records: Vec<AnswerRecord> = questions
        .iter()
        .map(|question| {
            match harness::answer_question(&ctx, &config.memory_mode, question, &book, &chunks) {
                Ok(answer) => AnswerRecord {
                    qid: question.qid.clone(),
                    mode: mode_label.clone(),
                    model: config.answerer.model.clone(),
                    answer_text: Some(answer),
                    error: None,
                },
                Err(e) => AnswerRecord {
                    qid: question.qid.clone(),
                    mode: mode_label.clone(),
                    model: config.answerer.model.clone(),
                    answer_text: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    write_jsonl(&config.output_dir.join("answers.jsonl"), &records)
}

fn score_one(
    config: &PipelineConfig,
    backends: &Backends,
    question: &Question,
    answer: &AnswerRecord,
) -> ScoreLine {
    let base = ScoreLine {
        qid: answer.qid.clone(),
        mode: answer.mode.clone(),
        model: answer.model.clone(),
        status: "unanswered".into(),
        record: None,
        verdict: None,
    };
    let Some(answer_text) = &answer.answer_text else {
        return base;
    };
    let gt_items = question.ground_truth.items();
    let verdict = match evaluator::judge_answer(
        backends.eval_judge.as_ref(),
        &config.eval_judge,
        question.trace.retrieval_type(),
        &gt_items,
        answer_text,
    ) {
        Ok(v) => v,
        Err(_) => {
            return ScoreLine {
                status: "unevaluated".into(),
                ..base
            }
        }
    };
    let mut record = evaluator::compute_f1(&verdict, gt_items.len());
    if question.get == GetMode::Chrono
        && matches!(question.ground_truth, GroundTruth::ChronoSequence(_))
        && evaluator::fully_matches(&record)
    {
        if let Ok((gt_idx, pred_idx)) = evaluator::match_chrono(
            backends.eval_judge.as_ref(),
            &config.eval_judge,
            &gt_items,
            &verdict.identified_items,
        ) {
            record.kendall_tau = evaluator::kendall_tau(&pred_idx, &gt_idx)
                .ok()
                .or_else(|| evaluator::kendall_tau(&gt_idx, &pred_idx).ok());
        }
    }
    ScoreLine {
        status: "scored".into(),
        record: Some(record),
        verdict: Some(verdict),
        ..base
    }
}

fn run_judge(config: &PipelineConfig, backends: &Backends) -> Result<(), PipelineError> {
    let questions: Vec<Question> =
        read_jsonl(Stage::Judge, &config.output_dir.join("questions.jsonl"))?;
    let answers: Vec<AnswerRecord> =
        read_jsonl(Stage::Judge, &config.output_dir.join("answers.jsonl"))?;
    let by_qid: BTreeMap<&str, &Question> =
        questions.iter().map(|q| (q.qid.as_str(), q)).collect();
    let lines: Vec<ScoreLine> = answers
        .iter()
        .filter_map(|answer| {
            by_qid
                .get(answer.qid.as_str())
                .map(|question| score_one(config, backends, question, answer))
        })
        .collect();
    write_jsonl(&config.output_dir.join("scores.jsonl"), &lines)
}

fn run_report(config: &PipelineConfig) -> Result<(), PipelineError> {
    let questions: Vec<Question> =
        read_jsonl(Stage::Report, &config.output_dir.join("questions.jsonl"))?;
    let lines: Vec<ScoreLine> =
        read_jsonl(Stage::Report, &config.output_dir.join("scores.jsonl"))?;
    let by_qid: BTreeMap<String, Question> =
        questions.into_iter().map(|q| (q.qid.clone(), q)).collect();
    let scored: Vec<ScoredQuestion> = lines
        .iter()
        .filter(|l| l.status == "scored")
        .filter_map(|l| {
            l.record.clone().map(|record| ScoredQuestion {
                qid: l.qid.clone(),
                mode: l.mode.clone(),
                model: l.model.clone(),
                record,
            })
        })
        .collect();
    let by_bin = report::aggregate(&scored, &by_qid, GroupBy::Bin);
    let by_cue = report::aggregate(&scored, &by_qid, GroupBy::Cue);
    let by_trace = report::aggregate(&scored, &by_qid, GroupBy::Trace);
    let mut csv = report::render_csv(&by_bin);
    csv.push_str(&report::render_csv(&by_cue));
    csv.push_str(&report::render_csv(&by_trace));
    write_atomic(&config.output_dir.join("report.csv"), &csv)?;
    let mut md = report::render_markdown("F1 by bin", &by_bin);
    md.push('\n');
    md.push_str(&report::render_markdown("F1 by cue", &by_cue));
    md.push('\n');
    md.push_str(&report::render_markdown("F1 by trace", &by_trace));
    write_atomic(&config.output_dir.join("report.md"), &md)?;
    let tracking = report::summarize_entity_tracking(&scored, &by_qid);
    let tracking_csv = format!(
        "latest_pct,all_pct,mean_kendall\n{:.4},{:.4},{}\n",
        tracking.latest_pct,
        tracking.all_pct,
        tracking.kendall_display()
    );
    write_atomic(&config.output_dir.join("tracking.csv"), &tracking_csv)
}

fn stage_backends(config: &PipelineConfig, stage: Stage) -> Result<Backends, PipelineError> {
    // The mock answerer replays canonical ground-truth renderings, which
    // only exist once questions are generated.
    let questions: Vec<Question> = if config.mock && matches!(stage, Stage::Answer) {
        read_jsonl(stage, &config.output_dir.join("questions.jsonl"))?
    } else {
        Vec::new()
    };
    Backends::for_config(config, &questions)
}

/// Run one stage, skipping it when its outputs exist and inputs are
/// unchanged per the content-hash manifest. Returns true when executed.
pub fn run_stage(stage: Stage, config: &PipelineConfig) -> Result<bool, PipelineError> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)?;
    for input in stage.inputs() {
        let path = config.output_dir.join(input);
        if !path.exists() {
            return Err(PipelineError::MissingUpstream {
                stage: stage.name().to_string(),
                path: path.display().to_string(),
            });
        }
    }
    let fingerprint = stage_fingerprint(stage, config);
    let mut manifest = load_manifest(&config.output_dir);
    let outputs_exist = stage
        .outputs()
        .iter()
        .all(|o| config.output_dir.join(o).exists());
    if outputs_exist && manifest.get(stage.name()) == Some(&fingerprint) {
        return Ok(false);
    }
    match stage {
        Stage::Universe => run_universe(config)?,
        Stage::Events => run_events(config)?,
        Stage::Book => run_book(config, &stage_backends(config, stage)?)?,
        Stage::Questions => run_questions(config)?,
        Stage::Answer => run_answer(config, &stage_backends(config, stage)?)?,
        Stage::Judge => run_judge(config, &stage_backends(config, stage)?)?,
        Stage::Report => run_report(config)?,
    }
    manifest.insert(stage.name().to_string(), stage_fingerprint(stage, config));
    save_manifest(&config.output_dir, &manifest)?;
    Ok(true)
}

/// Per-run counters printed by the pipeline command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub accepted_chapters: usize,
    pub discarded_events: usize,
    pub selected_questions: usize,
    pub questions_per_bin: BTreeMap<String, usize>,
    pub scored: usize,
    pub unevaluated: usize,
    pub unanswered: usize,
}

impl std::fmt::Display for PipelineSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "chapters: {} accepted, {} discarded",
            self.accepted_chapters, self.discarded_events
        )?;
        writeln!(f, "questions selected: {}", self.selected_questions)?;
        for (bin, n) in &self.questions_per_bin {
            writeln!(f, "  bin {bin}: {n}")?;
        }
        write!(
            f,
            "scored: {}, unevaluated: {}, unanswered: {}",
            self.scored, self.unevaluated, self.unanswered
        )
    }
}

/// Run all stages in order and summarize the artifacts.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineSummary, PipelineError> {
    for stage in Stage::ALL {
        run_stage(stage, config)?;
    }
    let chapters: Vec<bookgen::BookChapter> =
        read_json(Stage::Report, &config.output_dir.join("book.json"))?;
    let discarded: Vec<usize> = read_json(Stage::Report, &config.output_dir.join("discards.json"))?;
    let questions: Vec<Question> =
        read_jsonl(Stage::Report, &config.output_dir.join("questions.jsonl"))?;
    let lines: Vec<ScoreLine> =
        read_jsonl(Stage::Report, &config.output_dir.join("scores.jsonl"))?;
    let mut questions_per_bin: BTreeMap<String, usize> = BTreeMap::new();
    for q in &questions {
        *questions_per_bin.entry(q.bin.clone()).or_insert(0) += 1;
    }
    let count = |status: &str| lines.iter().filter(|l| l.status == status).count();
    Ok(PipelineSummary {
        accepted_chapters: chapters.len(),
        discarded_events: discarded.len(),
        selected_questions: questions.len(),
        questions_per_bin,
        scored: count("scored"),
        unevaluated: count("unevaluated"),
        unanswered: count("unanswered"),
    })
}
