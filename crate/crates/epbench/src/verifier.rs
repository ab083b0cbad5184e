//! Structural and semantic verification of candidate chapters.
//!
//! Structural checks are exact: paragraph numbering "(X) " starting at 1
//! with increments of one, secondary characters only as `$entity_X`
//! placeholders, and verbatim presence of the date, location, full entity
//! name and "{first_name} {detail}" string in their designated paragraphs
//! with absence everywhere else. Matching is case- and whitespace-sensitive
//! substring search. Semantic checks ask a judge model four boolean
//! questions about the chapter.

use crate::eventgen::{Event, EventMeta};
use crate::gateway::{ChatBackend, ChatRequest, GatewayError, ModelSpec};
use crate::jsonx::first_json_object;
use crate::prompts;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("malformed paragraph numbering: {0}")]
    MalformedNumbering(String),
    #[error("semantic verdict unparseable: {0}")]
    VerdictUnparseable(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Which structural rule a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleId {
    Numbering,
    ParagraphCount,
    PlaceholderGrammar,
    MissingDate,
    LeakedDate,
    MissingLocation,
    LeakedLocation,
    MissingEntity,
    LeakedEntity,
    MissingContent,
    LeakedContent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: RuleId,
    pub paragraph_number: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructuralReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

fn marker_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^\((\d+)\) ").unwrap())
}

/// Split a chapter into numbered paragraphs.
///
/// Numbering must start at 1 and increment by exactly one; bodies run to
/// the next marker with surrounding whitespace trimmed.
pub fn parse_paragraphs(text: &str) -> Result<Vec<(usize, String)>, VerifierError> {
    let mut markers = Vec::new();
    for caps in marker_regex().captures_iter(text) {
        let m = caps.get(0).unwrap();
        let number: usize = caps[1].parse().map_err(|_| {
            VerifierError::MalformedNumbering(format!("non-numeric marker '{}'", &caps[1]))
        })?;
        markers.push((m.start(), m.end(), number));
    }
    if markers.is_empty() {
        return Err(VerifierError::MalformedNumbering(
            "no '(X) ' paragraph markers found".into(),
        ));
    }
    if !text[..markers[0].0].trim().is_empty() {
        return Err(VerifierError::MalformedNumbering(
            "text before first paragraph marker".into(),
        ));
    }
    let mut paragraphs = Vec::with_capacity(markers.len());
    for (pos, &(_, body_start, number)) in markers.iter().enumerate() {
        let expected = pos + 1;
        if number != expected {
            return Err(VerifierError::MalformedNumbering(format!(
                "expected paragraph {expected}, found {number}"
            )));
        }
        let body_end = markers
            .get(pos + 1)
            .map_or(text.len(), |&(next_start, _, _)| next_start);
        paragraphs.push((number, text[body_start..body_end].trim().to_string()));
    }
    Ok(paragraphs)
}

fn placeholder_violations(text: &str, violations: &mut Vec<Violation>) {
    static RE: OnceLock<Regex> = OnceLock::new();
    let token = RE.get_or_init(|| Regex::new(r"\$\w+").unwrap());
    let valid = Regex::new(r"^\$entity_[0-9]+$").unwrap();
    for m in token.find_iter(text) {
        if !valid.is_match(m.as_str()) {
            violations.push(Violation {
                rule_id: RuleId::PlaceholderGrammar,
                paragraph_number: None,
                message: format!("invalid placeholder token '{}'", m.as_str()),
            });
        }
    }
}

fn placement_check(
    paragraphs: &[(usize, String)],
    needle: &str,
    designated: usize,
    missing: RuleId,
    leaked: RuleId,
    label: &str,
    violations: &mut Vec<Violation>,
) {
    for (number, body) in paragraphs {
        let present = body.contains(needle);
        if *number == designated && !present {
            violations.push(Violation {
                rule_id: missing,
                paragraph_number: Some(*number),
                message: format!("{label} '{needle}' missing from paragraph {number}"),
            });
        }
        if *number != designated && present {
            violations.push(Violation {
                rule_id: leaked,
                paragraph_number: Some(*number),
                message: format!("{label} '{needle}' leaked into paragraph {number}"),
            });
        }
    }
}

/// Run the full structural checklist against a chapter candidate.
pub fn verify_structure(text: &str, event: &Event, meta: &EventMeta) -> StructuralReport {
    let mut violations = Vec::new();
    let paragraphs = match parse_paragraphs(text) {
        Ok(p) => p,
        Err(e) => {
            return StructuralReport {
                passed: false,
                violations: vec![Violation {
                    rule_id: RuleId::Numbering,
                    paragraph_number: None,
                    message: e.to_string(),
                }],
            }
        }
    };
    if paragraphs.len() != meta.nb_paragraphs {
        violations.push(Violation {
            rule_id: RuleId::ParagraphCount,
            paragraph_number: None,
            message: format!(
                "expected {} paragraphs, found {}",
                meta.nb_paragraphs,
                paragraphs.len()
            ),
        });
    }
    placeholder_violations(text, &mut violations);
    let content_needle = format!("{} {}", prompts::first_name(&event.ent), event.d);
    placement_check(&paragraphs, &event.t, meta.idx_paragraph.date, RuleId::MissingDate, RuleId::LeakedDate, "date", &mut violations);
    placement_check(&paragraphs, &event.s, meta.idx_paragraph.location, RuleId::MissingLocation, RuleId::LeakedLocation, "location", &mut violations);
    placement_check(&paragraphs, &event.ent, meta.idx_paragraph.entity, RuleId::MissingEntity, RuleId::LeakedEntity, "entity", &mut violations);
    placement_check(&paragraphs, &content_needle, meta.idx_paragraph.content, RuleId::MissingContent, RuleId::LeakedContent, "content detail", &mut violations);
    StructuralReport {
        passed: violations.is_empty(),
        violations,
    }
}

/// The judge's four boolean answers about a chapter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemanticVerdict {
    pub answers: [bool; 4],
    pub raw_payload: String,
}

impl SemanticVerdict {
    pub fn valid(&self) -> bool {
        self.answers.iter().all(|&a| a)
    }
}

/// Parse the judge's response into a verdict.
pub fn parse_semantic_verdict(response: &str) -> Result<SemanticVerdict, VerifierError> {
    let object = first_json_object(response)
        .ok_or_else(|| VerifierError::VerdictUnparseable("no JSON object in response".into()))?;
    let value: serde_json::Value = serde_json::from_str(object)
        .map_err(|e| VerifierError::VerdictUnparseable(e.to_string()))?;
    let mut answers = [false; 4];
    for (i, answer) in answers.iter_mut().enumerate() {
        *answer = value
            .get((i + 1).to_string())
            .and_then(|v| v.as_bool())
            .ok_or_else(|| {
                VerifierError::VerdictUnparseable(format!("missing boolean answer {}", i + 1))
            })?;
    }
    Ok(SemanticVerdict {
        answers,
        raw_payload: response.to_string(),
    })
}

/// Ask the judge model the four semantic questions about a chapter.
///
/// `seed` feeds the request's cache slot so retry iterations of the same
/// chapter text get fresh judge calls under a replay cache.
pub fn verify_semantics(
    backend: &dyn ChatBackend,
    judge: &ModelSpec,
    chapter_text: &str,
    seed: Option<u64>,
) -> Result<SemanticVerdict, VerifierError> {
    let (system, user) = prompts::render_verify_prompt(chapter_text);
    let response = backend.chat(&ChatRequest {
        provider_id: judge.provider_id.clone(),
        model: judge.model.clone(),
        system_prompt: system,
        user_prompt: user,
        max_output_tokens: 256,
        temperature: 0.0,
        seed,
    })?;
    parse_semantic_verdict(&response)
}
