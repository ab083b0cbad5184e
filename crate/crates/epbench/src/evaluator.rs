//! Judge-assisted scoring of model answers.
//!
//! A judge model extracts the items present in a free-form answer and
//! assigns each ground-truth item a matching score in [0, 1]. The lenient
//! F1 caps the prediction count at the ground-truth size, and for
//! chronological questions a second judge pass maps predicted items to
//! ground-truth indices so Kendall's tau can score the ordering.

use crate::gateway::{ChatBackend, ChatRequest, GatewayError, ModelSpec};
use crate::jsonx::first_json_object;
use crate::prompts;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("judge verdict unparseable: {0}")]
    VerdictUnparseable(String),
    #[error("sequence too short for Kendall's tau: length {0}")]
    TooShort(usize),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// The scoring judge's structured output for one answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    /// Items the judge found in the answer; empty on abstaining answers.
    pub identified_items: Vec<String>,
    /// One (ground_truth_item, score) per ground-truth item, in ground
    /// truth order, scores clamped to [0, 1].
    pub matching_scores: Vec<(String, f64)>,
    pub explanation: String,
}

/// Lenient F1 bookkeeping for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub n_gt: usize,
    pub n_iditems: usize,
    pub n_pred: usize,
    /// Sum of matching scores (true-positive mass).
    pub s: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kendall_tau: Option<f64>,
}

fn coerce_score(value: &serde_json::Value) -> Option<f64> {
    let raw = match value {
        serde_json::Value::Number(n) => n.as_f64()?,
        serde_json::Value::String(s) => s.trim().parse().ok()?,
        _ => return None,
    };
    Some(raw.clamp(0.0, 1.0))
}

/// Parse the judge response and align scores onto the ground-truth order.
///
/// Missing entries score 0, extra entries are dropped, and scores emitted
/// as JSON strings are coerced to numbers.
pub fn parse_judge_verdict(
    response: &str,
    ground_truth: &[String],
) -> Result<JudgeVerdict, EvalError> {
    let object = first_json_object(response)
        .ok_or_else(|| EvalError::VerdictUnparseable("no JSON object in response".into()))?;
    let value: serde_json::Value =
        serde_json::from_str(object).map_err(|e| EvalError::VerdictUnparseable(e.to_string()))?;
    let identified_items: Vec<String> = value
        .get("identified_items_in_AI_answer")
        .and_then(|v| v.as_array())
        .ok_or_else(|| EvalError::VerdictUnparseable("missing identified_items_in_AI_answer".into()))?
        .iter()
        .filter_map(|v| v.as_str().map(str::to_string))
        .collect();
    let mut raw_scores: Vec<(String, f64)> = Vec::new();
    if let Some(entries) = value.get("matching_score").and_then(|v| v.as_array()) {
        for entry in entries {
            if let Some(map) = entry.as_object() {
                for (item, score) in map {
                    if let Some(score) = coerce_score(score) {
                        raw_scores.push((item.clone(), score));
                    }
                }
            }
        }
    }
    let matching_scores = ground_truth
        .iter()
        .map(|item| {
            let score = raw_scores
                .iter()
                .find(|(name, _)| name == item)
                .map_or(0.0, |(_, s)| *s);
            (item.clone(), score)
        })
        .collect();
    let explanation = value
        .get("explanation")
        .and_then(|v| v.as_str())
        .unwrap_or_default()
        .to_string();
    Ok(JudgeVerdict {
        identified_items,
        matching_scores,
        explanation,
    })
}

/// Ask the scoring judge to evaluate one answer against its ground truth.
pub fn judge_answer(
    backend: &dyn ChatBackend,
    judge: &ModelSpec,
    retrieval_type: &str,
    ground_truth: &[String],
    answer_text: &str,
) -> Result<JudgeVerdict, EvalError> {
    let user = prompts::render_eval_judge_prompt(retrieval_type, ground_truth, answer_text);
    let response = backend.chat(&ChatRequest {
        provider_id: judge.provider_id.clone(),
        model: judge.model.clone(),
        system_prompt: "You are an expert judge.".to_string(),
        user_prompt: user,
        max_output_tokens: 2048,
        temperature: 0.0,
        seed: None,
    })?;
    parse_judge_verdict(&response, ground_truth)
}

/// Lenient F1 from an aligned verdict.
///
/// n_pred = min(n_iditems, n_gt) when ground truth is non-empty, else
/// n_iditems. Empty ground truth scores 1 exactly when the model abstained
/// (no identified items) and 0 otherwise.
pub fn compute_f1(verdict: &JudgeVerdict, n_gt: usize) -> ScoreRecord {
    let n_iditems = verdict.identified_items.len();
    let s: f64 = verdict.matching_scores.iter().map(|(_, score)| score).sum();
    if n_gt == 0 {
        let f1 = if n_iditems == 0 { 1.0 } else { 0.0 };
        return ScoreRecord {
            n_gt,
            n_iditems,
            n_pred: n_iditems,
            s: 0.0,
            precision: f1,
            recall: f1,
            f1,
            kendall_tau: None,
        };
    }
    let n_pred = n_iditems.min(n_gt);
    let precision = if n_pred > 0 { s / n_pred as f64 } else { 0.0 };
    let recall = s / n_gt as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    ScoreRecord {
        n_gt,
        n_iditems,
        n_pred,
        s,
        precision,
        recall,
        f1,
        kendall_tau: None,
    }
}

/// Whether a verdict fully matches the ground truth, the precondition for
/// scoring chronological order.
pub fn fully_matches(record: &ScoreRecord) -> bool {
    record.n_gt > 0 && record.n_iditems == record.n_gt && (record.s - record.n_gt as f64).abs() < 1e-9
}

/// Parse the chrono judge response into predicted ground-truth indices.
pub fn parse_chrono_verdict(response: &str) -> Result<Vec<i64>, EvalError> {
    let object = first_json_object(response)
        .ok_or_else(|| EvalError::VerdictUnparseable("no JSON object in response".into()))?;
    let value: serde_json::Value =
        serde_json::from_str(object).map_err(|e| EvalError::VerdictUnparseable(e.to_string()))?;
    value
        .get("predicted_indexes")
        .and_then(|v| v.as_array())
        .ok_or_else(|| EvalError::VerdictUnparseable("missing predicted_indexes".into()))?
        .iter()
        .map(|v| {
            v.as_i64()
                .ok_or_else(|| EvalError::VerdictUnparseable("non-integer index".into()))
        })
        .collect()
}

/// Ask the judge to map predicted items onto ground-truth indices using
/// the earliest-unused-match rule. Returns (gt_indexes, predicted_indexes)
/// with -1 marking unmatched predictions.
pub fn match_chrono(
    backend: &dyn ChatBackend,
    judge: &ModelSpec,
    ground_truth_items: &[String],
    predicted_items: &[String],
) -> Result<(Vec<i64>, Vec<i64>), EvalError> {
    let user = prompts::render_chrono_judge_prompt(ground_truth_items, predicted_items);
    let response = backend.chat(&ChatRequest {
        provider_id: judge.provider_id.clone(),
        model: judge.model.clone(),
        system_prompt: "You are an expert judge.".to_string(),
        user_prompt: user,
        max_output_tokens: 1024,
        temperature: 0.0,
        seed: None,
    })?;
    let predicted = parse_chrono_verdict(&response)?;
    let gt_indexes = (0..ground_truth_items.len() as i64).collect();
    Ok((gt_indexes, predicted))
}

/// Kendall's tau (tau-a) over the common matched elements.
///
/// Positions where either sequence holds -1 are dropped pairwise; the
/// remaining pairs must number at least 2.
pub fn kendall_tau(reference: &[i64], candidate: &[i64]) -> Result<f64, EvalError> {
    let pairs: Vec<(i64, i64)> = reference
        .iter()
        .zip(candidate)
        .filter(|(&r, &c)| r >= 0 && c >= 0)
        .map(|(&r, &c)| (r, c))
        .collect();
    let n = pairs.len();
    if n < 2 {
        return Err(EvalError::TooShort(n));
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let ref_order = pairs[i].0.cmp(&pairs[j].0);
            let cand_order = pairs[i].1.cmp(&pairs[j].1);
            if ref_order == cand_order {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    Ok((concordant - discordant) as f64 / (n * (n - 1) / 2) as f64)
}
