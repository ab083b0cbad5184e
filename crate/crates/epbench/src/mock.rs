//! Offline stand-ins for every model role in the pipeline.
//!
//! The mock author constructs chapters that satisfy the structural
//! verifier by parsing its own generation prompt; the deterministic judge
//! scores answers by exact substring matching against the ground-truth
//! list it is shown; the mock answerer either replays the canonical
//! ground-truth rendering, abstains, or fabricates. Together they make the
//! whole pipeline runnable and checkable with zero network access.

use crate::gateway::{ChatBackend, ChatRequest, EmbedBackend, EmbedRequest, GatewayError};
use crate::prompts;
use regex::Regex;
use std::collections::HashMap;

/// Chapter-generation constraints recovered from a rendered prompt.
#[derive(Debug, Clone)]
struct PromptSpec {
    date: String,
    location: String,
    entity: String,
    first_name: String,
    detail: String,
    nb_paragraphs: usize,
    idx_date: usize,
    idx_location: usize,
    idx_entity: usize,
    idx_content: usize,
}

fn parse_chapter_prompt(user_prompt: &str) -> Option<PromptSpec> {
    let line = |re: &str| -> Option<Vec<String>> {
        Regex::new(re)
            .ok()?
            .captures(user_prompt)
            .map(|c| c.iter().skip(1).flatten().map(|m| m.as_str().to_string()).collect())
    };
    let loc = line(r"- Full location '(.+?)': must appear verbatim in paragraph (\d+) only")?;
    let date = line(r"- Full date '(.+?)': must appear verbatim in paragraph (\d+) only")?;
    let ent = line(r"- Full name '(.+?)': must appear verbatim in paragraph (\d+) only")?;
    let content =
        line(r"- Full detail that '(\S+) (.+?)': must appear verbatim in paragraph (\d+)")?;
    let nb = line(r"1\. Divide the text into (\d+) paragraph")?;
    Some(PromptSpec {
        location: loc[0].clone(),
        idx_location: loc[1].parse().ok()?,
        date: date[0].clone(),
        idx_date: date[1].parse().ok()?,
        entity: ent[0].clone(),
        idx_entity: ent[1].parse().ok()?,
        first_name: content[0].clone(),
        detail: content[1].clone(),
        idx_content: content[2].parse().ok()?,
        nb_paragraphs: nb[0].parse().ok()?,
    })
}

/// Build a chapter that satisfies every structural constraint in the
/// rendered generation prompt.
pub fn author_compliant_chapter(user_prompt: &str) -> Option<String> {
    let spec = parse_chapter_prompt(user_prompt)?;
    let mut paragraphs = Vec::with_capacity(spec.nb_paragraphs);
    for p in 1..=spec.nb_paragraphs {
        let mut sentences = Vec::new();
        sentences.push(format!("({p}) The gathering carried on around the grounds."));
        if p == spec.idx_entity {
            sentences.push(format!("{} watched the crowd closely.", spec.entity));
        }
        if p == spec.idx_location {
            sentences.push(format!("Everything unfolded at {}.", spec.location));
        }
        if p == spec.idx_date {
            sentences.push(format!("It was {}.", spec.date));
        }
        if p == spec.idx_content {
            sentences.push(format!(
                "Amid the bustle, {} {}.",
                spec.first_name, spec.detail
            ));
        }
        if p == 1 {
            sentences.push("Nearby, $entity_1 exchanged a glance with $entity_2.".to_string());
        }
        sentences.push(format!("{} felt the hours pass.", spec.first_name));
        paragraphs.push(sentences.join(" "));
    }
    Some(paragraphs.join("\n\n"))
}

/// Offline author plus semantic-verifier backend for book generation.
///
/// Compliant mode emits constraint-satisfying chapters accepted at the
/// first iteration; non-compliant mode emits unnumbered prose that fails
/// the structural check every time.
pub struct MockBookBackend {
    pub compliant: bool,
}

impl ChatBackend for MockBookBackend {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        if request.system_prompt == prompts::VERIFY_SYSTEM_PROMPT {
            return Ok("{\"1\": true, \"2\": true, \"3\": true, \"4\": true}".to_string());
        }
        if request.system_prompt == prompts::CHAPTER_SYSTEM_PROMPT {
            if !self.compliant {
                return Ok("A quiet day passed without structure.".to_string());
            }
            return author_compliant_chapter(&request.user_prompt)
                .ok_or_else(|| GatewayError::Provider("unrecognized chapter prompt".into()));
        }
        Err(GatewayError::Provider(format!(
            "mock book backend cannot serve system prompt '{}'",
            request.system_prompt
        )))
    }
}

/// How the mock answerer responds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerBehavior {
    /// Replay the canonical ground-truth rendering for the question.
    Replay,
    /// Always claim there is no information.
    Abstain,
    /// Always assert a value absent from every ground truth.
    Fabricate,
}

pub const ABSTAIN_TEXT: &str = "There is no information about this in the text, so I cannot answer.";
pub const FABRICATE_TEXT: &str = "It was the Grand Imaginary Gala hosted at Nowhere Plaza on Janulember 42, 3024.";

/// Offline answerer keyed by exact question text.
pub struct MockAnswerBackend {
    answers: HashMap<String, String>,
    pub behavior: AnswerBehavior,
}

impl MockAnswerBackend {
    pub fn new(behavior: AnswerBehavior) -> Self {
        Self {
            answers: HashMap::new(),
            behavior,
        }
    }

    /// Register the canonical answer for a question text.
    pub fn with_answers(mut self, answers: impl IntoIterator<Item = (String, String)>) -> Self {
        self.answers.extend(answers);
        self
    }

    fn extract_question(user_prompt: &str) -> Option<&str> {
        if let Some(rest) = user_prompt.split("## Question:\n\n").nth(1) {
            return rest.split("\n\nPlease answer the question").next().map(str::trim);
        }
        user_prompt.split("\nQuestion: ").nth(1).map(str::trim)
    }
}

impl ChatBackend for MockAnswerBackend {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        match self.behavior {
            AnswerBehavior::Abstain => Ok(ABSTAIN_TEXT.to_string()),
            AnswerBehavior::Fabricate => Ok(FABRICATE_TEXT.to_string()),
            AnswerBehavior::Replay => {
                let question = Self::extract_question(&request.user_prompt).ok_or_else(|| {
                    GatewayError::Provider("no question found in answer prompt".into())
                })?;
                Ok(self
                    .answers
                    .get(question)
                    .cloned()
                    .unwrap_or_else(|| ABSTAIN_TEXT.to_string()))
            }
        }
    }
}

/// Parse a Python-style list of single-quoted strings.
fn parse_quoted_list(text: &str) -> Vec<String> {
    Regex::new(r"'([^']*)'")
        .unwrap()
        .captures_iter(text)
        .map(|c| c[1].to_string())
        .collect()
}

fn first_line_after<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    text.split(prefix).nth(1).and_then(|rest| rest.lines().next())
}

fn is_negative(answer: &str) -> bool {
    let lower = answer.to_lowercase();
    lower.contains("no information") || lower.contains("cannot answer") || lower.contains("cannot find")
}

/// Deterministic scoring and chrono-matching judge.
///
/// Items are matched by exact substring presence of each ground-truth item
/// in the answer; chrono matching applies the earliest-unused-index rule
/// with exact string equality.
pub struct DeterministicJudgeBackend;

impl DeterministicJudgeBackend {
    fn eval(&self, user_prompt: &str) -> Result<String, GatewayError> {
        // The ground-truth items may span lines (full-chapter answers), so
        // take the whole section up to the answer marker.
        let gt_section = user_prompt
            .split("Groundtruth: ")
            .nth(1)
            .and_then(|rest| rest.split("\nAI-generated answer: ").next())
            .ok_or_else(|| GatewayError::Provider("no groundtruth section".into()))?;
        let ground_truth = parse_quoted_list(gt_section);
        let answer = user_prompt
            .split("AI-generated answer: ")
            .nth(1)
            .and_then(|rest| rest.split("\n\n\nYour task:").next())
            .ok_or_else(|| GatewayError::Provider("no answer section".into()))?;
        let (identified, scores): (Vec<String>, Vec<(String, f64)>) = if is_negative(answer) {
            (Vec::new(), ground_truth.iter().map(|g| (g.clone(), 0.0)).collect())
        } else {
            let found: Vec<String> = ground_truth
                .iter()
                .filter(|g| answer.contains(g.as_str()))
                .cloned()
                .collect();
            let identified = if found.is_empty() {
                vec!["unsupported assertion".to_string()]
            } else {
                found.clone()
            };
            let scores = ground_truth
                .iter()
                .map(|g| (g.clone(), if found.contains(g) { 1.0 } else { 0.0 }))
                .collect();
            (identified, scores)
        };
        let payload = serde_json::json!({
            "identified_items_in_AI_answer": identified,
            "matching_score": scores
                .iter()
                .map(|(item, score)| {
                    let mut entry = serde_json::Map::new();
                    entry.insert(item.clone(), serde_json::json!(score));
                    serde_json::Value::Object(entry)
                })
                .collect::<Vec<_>>(),
            "explanation": "deterministic substring matching",
        });
        Ok(payload.to_string())
    }

    fn chrono(&self, user_prompt: &str) -> Result<String, GatewayError> {
        let given = user_prompt
            .split("Given:")
            .nth(1)
            .ok_or_else(|| GatewayError::Provider("no Given section".into()))?;
        let gt_line = first_line_after(given, "Groundtruth list: ")
            .ok_or_else(|| GatewayError::Provider("no groundtruth list".into()))?;
        let pred_line = first_line_after(given, "Predicted list: ")
            .ok_or_else(|| GatewayError::Provider("no predicted list".into()))?;
        let ground_truth = parse_quoted_list(gt_line);
        let predicted = parse_quoted_list(pred_line);
        let mut used = vec![false; ground_truth.len()];
        let predicted_indexes: Vec<i64> = predicted
            .iter()
            .map(|item| {
                for (i, gt) in ground_truth.iter().enumerate() {
                    if !used[i] && gt == item {
                        used[i] = true;
                        return i as i64;
                    }
                }
                -1
            })
            .collect();
        let payload = serde_json::json!({
            "groundtruth_indexes": (0..ground_truth.len()).collect::<Vec<_>>(),
            "predicted_indexes": predicted_indexes,
            "explanation": "deterministic earliest-unused exact matching",
        });
        Ok(payload.to_string())
    }
}

impl ChatBackend for DeterministicJudgeBackend {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        if request.user_prompt.starts_with("You are an expert judge evaluating the accuracy") {
            self.eval(&request.user_prompt)
        } else if request
            .user_prompt
            .starts_with("You are an expert judge evaluating the alignment")
        {
            self.chrono(&request.user_prompt)
        } else {
            Err(GatewayError::Provider("unrecognized judge prompt".into()))
        }
    }
}

/// Deterministic embedding backend hashing each text to a 64-dim unit
/// vector.
pub struct HashEmbedBackend {
    inner: crate::gateway::testing::UnitEmbedProvider,
}

impl Default for HashEmbedBackend {
    fn default() -> Self {
        Self {
            inner: crate::gateway::testing::UnitEmbedProvider::new(64),
        }
    }
}

impl EmbedBackend for HashEmbedBackend {
    fn embed(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, GatewayError> {
        request.validate()?;
        Ok(request
            .texts
            .iter()
            .map(|t| self.inner.vector_for(t))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventgen::{Event, EventMeta, ParagraphPlacement};
    use crate::evaluator;
    use crate::gateway::ModelSpec;
    use crate::verifier;

    fn event() -> Event {
        Event {
            index: 0,
            t: "September 13, 2025".into(),
            s: "Bethpage Black Course".into(),
            ent: "Ezra Edwards".into(),
            c: "Parkour Workshop".into(),
            d: "demonstrated cat leaps at the rig".into(),
        }
    }

    fn meta() -> EventMeta {
        EventMeta {
            nb_paragraphs: 7,
            idx_paragraph: ParagraphPlacement {
                date: 7,
                location: 2,
                entity: 2,
                content: 2,
            },
            style: "thriller".into(),
        }
    }

    #[test]
    fn mock_author_output_passes_structural_verification() {
        let (_, user) = prompts::render_chapter_prompt(&event(), &meta(), &["a".into(), "b".into(), "c".into()]);
        let chapter = author_compliant_chapter(&user).unwrap();
        let report = verifier::verify_structure(&chapter, &event(), &meta());
        assert!(report.passed, "violations: {:?}", report.violations);
        assert_eq!(verifier::parse_paragraphs(&chapter).unwrap().len(), 7);
    }

    #[test]
    fn deterministic_judge_scores_replayed_answer_perfectly() {
        let gt = vec!["Central Park".to_string(), "High Line".to_string()];
        let answer = "The answer items are: Central Park; High Line.";
        let prompt_verdict = evaluator::judge_answer(
            &DeterministicJudgeBackend,
            &ModelSpec::new("mock", "judge"),
            "Spaces",
            &gt,
            answer,
        )
        .unwrap();
        let record = evaluator::compute_f1(&prompt_verdict, gt.len());
        assert_eq!(record.f1, 1.0);
    }

    #[test]
    fn deterministic_judge_handles_abstention_and_fabrication() {
        let judge = DeterministicJudgeBackend;
        let spec = ModelSpec::new("mock", "judge");
        let empty_gt: Vec<String> = Vec::new();
        let abstain = evaluator::judge_answer(&judge, &spec, "Spaces", &empty_gt, ABSTAIN_TEXT).unwrap();
        assert_eq!(evaluator::compute_f1(&abstain, 0).f1, 1.0);
        let fabricate =
            evaluator::judge_answer(&judge, &spec, "Spaces", &empty_gt, FABRICATE_TEXT).unwrap();
        assert_eq!(evaluator::compute_f1(&fabricate, 0).f1, 0.0);
    }

    #[test]
    fn deterministic_chrono_matching_is_earliest_unused() {
        let (_, predicted) = evaluator::match_chrono(
            &DeterministicJudgeBackend,
            &ModelSpec::new("mock", "judge"),
            &["A".into(), "B".into(), "A".into()],
            &["A".into(), "A".into(), "C".into()],
        )
        .unwrap();
        assert_eq!(predicted, vec![0, 2, -1]);
    }

    #[test]
    fn answer_backend_replays_registered_answers() {
        let backend = MockAnswerBackend::new(AnswerBehavior::Replay)
            .with_answers([("What happened?".to_string(), "A parade happened.".to_string())]);
        let request = ChatRequest {
            provider_id: "mock".into(),
            model: "answerer".into(),
            system_prompt: prompts::ANSWER_SYSTEM_PROMPT.into(),
            user_prompt: prompts::render_in_context_prompt("book text", "What happened?"),
            max_output_tokens: 100,
            temperature: 0.0,
            seed: None,
        };
        assert_eq!(backend.chat(&request).unwrap(), "A parade happened.");
        let ft_request = ChatRequest {
            user_prompt: prompts::render_finetuned_prompt("What happened?"),
            ..request
        };
        assert_eq!(backend.chat(&ft_request).unwrap(), "A parade happened.");
    }
}
