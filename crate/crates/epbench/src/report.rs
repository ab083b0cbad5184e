//! Aggregation of score records into table-shaped summaries.
//!
//! Produces mean and standard deviation F1 grouped by bin, cue, trace or
//! cue crossed with bin, plus the entity-tracking summary (latest-state
//! accuracy, full-set chronological match rate, mean Kendall's tau). The
//! standard deviation uses the population formula.

use crate::evaluator::ScoreRecord;
use crate::qagen::{GetMode, Question};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A scored question joined with its score record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredQuestion {
    pub qid: String,
    pub mode: String,
    pub model: String,
    pub record: ScoreRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Bin,
    Cue,
    Trace,
    CueBin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub group: String,
    pub n: usize,
    pub mean_f1: f64,
    pub std_f1: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn cue_label(question: &Question) -> String {
    let mut parts = Vec::new();
    for (slot, label) in [
        (question.cue.t.is_some(), "t"),
        (question.cue.s.is_some(), "s"),
        (question.cue.ent.is_some(), "ent"),
        (question.cue.c.is_some(), "c"),
    ] {
        if slot {
            parts.push(label);
        }
    }
    format!("({})", parts.join(","))
}

const BIN_ORDER: [&str; 5] = ["0", "1", "2", "3-5", "6+"];
const CUE_ORDER: [&str; 15] = [
    "(t)", "(s)", "(ent)", "(c)",
    "(t,s)", "(t,ent)", "(t,c)", "(s,ent)", "(s,c)", "(ent,c)",
    "(t,s,ent)", "(t,s,c)", "(t,ent,c)", "(s,ent,c)", "(t,s,ent,c)",
];
const TRACE_ORDER: [&str; 6] = [
    "Times", "Spaces", "Entities", "Contents", "OtherEntities", "FullDetails",
];

fn group_rank(group_by: GroupBy, key: &str) -> usize {
    let position = |order: &[&str], key: &str| {
        order.iter().position(|k| *k == key).unwrap_or(usize::MAX)
    };
    match group_by {
        GroupBy::Bin => position(&BIN_ORDER, key),
        GroupBy::Cue => position(&CUE_ORDER, key),
        GroupBy::Trace => position(&TRACE_ORDER, key),
        GroupBy::CueBin => {
            let (cue, bin) = key.rsplit_once(" bin ").unwrap_or((key, "0"));
            position(&CUE_ORDER, cue) * 8 + position(&BIN_ORDER, bin).min(7)
        }
    }
}

/// Group scored questions and reduce to mean and std F1 per cell.
///
/// Row order is deterministic: bins 0, 1, 2, 3-5, 6+ and cues in template
/// table order.
pub fn aggregate(
    scores: &[ScoredQuestion],
    questions: &BTreeMap<String, Question>,
    group_by: GroupBy,
) -> Vec<AggregateCell> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for scored in scores {
        let Some(question) = questions.get(&scored.qid) else {
            continue;
        };
        let key = match group_by {
            GroupBy::Bin => question.bin.clone(),
            GroupBy::Cue => cue_label(question),
            GroupBy::Trace => question.trace.retrieval_type().to_string(),
            GroupBy::CueBin => format!("{} bin {}", cue_label(question), question.bin),
        };
        groups.entry(key).or_default().push(scored.record.f1);
    }
    let mut cells: Vec<AggregateCell> = groups
        .into_iter()
        .map(|(group, values)| {
            let (mean_f1, std_f1) = mean_std(&values);
            AggregateCell {
                group,
                n: values.len(),
                mean_f1,
                std_f1,
            }
        })
        .collect();
    cells.sort_by_key(|c| (group_rank(group_by, &c.group), c.group.clone()));
    cells
}

/// The entity-tracking summary over entity-cue questions with at least
/// two matching events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingSummary {
    /// Fraction of latest-mode questions answered with F1 = 1.
    pub latest_pct: f64,
    /// Fraction of chrono-mode questions whose verdict fully matched the
    /// ground truth set.
    pub all_pct: f64,
    /// Mean Kendall's tau over the fully matched subset; None when empty.
    pub mean_kendall: Option<f64>,
}

impl TrackingSummary {
    pub fn kendall_display(&self) -> String {
        match self.mean_kendall {
            Some(tau) => format!("{tau:.2}"),
            None => "n.a.".to_string(),
        }
    }
}

/// Summarize entity tracking, restricted to entity-cue questions with
/// n_gt >= 2.
pub fn summarize_entity_tracking(
    scores: &[ScoredQuestion],
    questions: &BTreeMap<String, Question>,
) -> TrackingSummary {
    let relevant = |q: &Question| {
        q.cue.ent.is_some()
            && q.cue.t.is_none()
            && q.cue.s.is_none()
            && q.cue.c.is_none()
            && q.matching_event_indices.len() >= 2
    };
    let mut latest_total = 0usize;
    let mut latest_perfect = 0usize;
    let mut chrono_total = 0usize;
    let mut chrono_matched = 0usize;
    let mut taus = Vec::new();
    for scored in scores {
        let Some(question) = questions.get(&scored.qid) else {
            continue;
        };
        if !relevant(question) {
            continue;
        }
        match question.get {
            GetMode::Latest => {
                latest_total += 1;
                if (scored.record.f1 - 1.0).abs() < 1e-9 {
                    latest_perfect += 1;
                }
            }
            GetMode::Chrono => {
                chrono_total += 1;
                if crate::evaluator::fully_matches(&scored.record) {
                    chrono_matched += 1;
                    if let Some(tau) = scored.record.kendall_tau {
                        taus.push(tau);
                    }
                }
            }
            GetMode::All => {}
        }
    }
    let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    TrackingSummary {
        latest_pct: pct(latest_perfect, latest_total),
        all_pct: pct(chrono_matched, chrono_total),
        mean_kendall: if taus.is_empty() {
            None
        } else {
            Some(taus.iter().sum::<f64>() / taus.len() as f64)
        },
    }
}

/// Render aggregate cells as CSV (header documents the std convention).
pub fn render_csv(cells: &[AggregateCell]) -> String {
    let mut out = String::from("# std is the population standard deviation\ngroup,n,mean_f1,std_f1\n");
    for cell in cells {
        out.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            cell.group, cell.n, cell.mean_f1, cell.std_f1
        ));
    }
    out
}

/// Render aggregate cells as a markdown table.
pub fn render_markdown(title: &str, cells: &[AggregateCell]) -> String {
    let mut out = format!("## {title}\n\n| group | n | mean F1 | std F1 |\n|---|---|---|---|\n");
    for cell in cells {
        out.push_str(&format!(
            "| {} | {} | {:.3} | {:.3} |\n",
            cell.group, cell.n, cell.mean_f1, cell.std_f1
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::JudgeVerdict;
    use crate::qagen::{Cue, GroundTruth, QuestionKind, Trace};

    fn question(qid: &str, bin: &str, ent: Option<&str>, get: GetMode, matches: usize) -> Question {
        Question {
            qid: qid.to_string(),
            template_id: 0,
            cue: Cue {
                ent: ent.map(str::to_string),
                ..Default::default()
            },
            kind: QuestionKind::Nonempty,
            matching_event_indices: (0..matches).collect(),
            bin: bin.to_string(),
            question_text: format!("q {qid}"),
            ground_truth: GroundTruth::Empty,
            trace: Trace::Times,
            get,
        }
    }

    fn scored(qid: &str, f1: f64, tau: Option<f64>, n_gt: usize, full: bool) -> ScoredQuestion {
        let n_items = if full { n_gt } else { n_gt.saturating_sub(1).max(1) };
        let verdict = JudgeVerdict {
            identified_items: (0..n_items).map(|i| format!("i{i}")).collect(),
            matching_scores: (0..n_gt)
                .map(|i| (format!("g{i}"), if full { 1.0 } else { 0.0 }))
                .collect(),
            explanation: String::new(),
        };
        let mut record = crate::evaluator::compute_f1(&verdict, n_gt);
        record.f1 = f1;
        record.kendall_tau = tau;
        ScoredQuestion {
            qid: qid.to_string(),
            mode: "in_context".into(),
            model: "m".into(),
            record,
        }
    }

    #[test]
    fn aggregate_means_and_ordering() {
        let mut questions = BTreeMap::new();
        questions.insert("a".to_string(), question("a", "6+", None, GetMode::All, 6));
        questions.insert("b".to_string(), question("b", "1", None, GetMode::All, 1));
        questions.insert("c".to_string(), question("c", "1", None, GetMode::All, 1));
        let scores = vec![
            scored("a", 1.0, None, 6, true),
            scored("b", 0.0, None, 1, false),
            scored("c", 1.0, None, 1, true),
        ];
        let cells = aggregate(&scores, &questions, GroupBy::Bin);
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].group, "1");
        assert_eq!(cells[0].mean_f1, 0.5);
        assert_eq!(cells[0].std_f1, 0.5);
        assert_eq!(cells[1].group, "6+");
        assert_eq!(cells[1].n, 1);
        assert_eq!(cells[1].std_f1, 0.0);
        assert_eq!(cells.iter().map(|c| c.n).sum::<usize>(), scores.len());
    }

    #[test]
    fn aggregation_is_permutation_invariant() {
        let mut questions = BTreeMap::new();
        for (i, bin) in ["0", "1", "2", "3-5"].iter().enumerate() {
            questions.insert(format!("q{i}"), question(&format!("q{i}"), bin, None, GetMode::All, i));
        }
        let mut scores: Vec<ScoredQuestion> = (0..4)
            .map(|i| scored(&format!("q{i}"), i as f64 / 4.0, None, 2, false))
            .collect();
        let forward = aggregate(&scores, &questions, GroupBy::Bin);
        scores.reverse();
        assert_eq!(forward, aggregate(&scores, &questions, GroupBy::Bin));
    }

    #[test]
    fn tracking_summary_no_matches_is_na() {
        let mut questions = BTreeMap::new();
        questions.insert("a".into(), question("a", "2", Some("Ada North"), GetMode::Chrono, 2));
        let scores = vec![scored("a", 0.3, None, 2, false)];
        let summary = summarize_entity_tracking(&scores, &questions);
        assert_eq!(summary.all_pct, 0.0);
        assert_eq!(summary.mean_kendall, None);
        assert_eq!(summary.kendall_display(), "n.a.");
    }

    #[test]
    fn tracking_summary_hand_computed() {
        let mut questions = BTreeMap::new();
        for i in 0..4 {
            questions.insert(
                format!("c{i}"),
                question(&format!("c{i}"), "2", Some("Ada North"), GetMode::Chrono, 2),
            );
        }
        questions.insert("l0".into(), question("l0", "2", Some("Ada North"), GetMode::Latest, 2));
        let scores = vec![
            scored("c0", 1.0, Some(1.0), 2, true),
            scored("c1", 1.0, Some(0.33), 2, true),
            scored("c2", 0.4, None, 2, false),
            scored("c3", 0.6, None, 2, false),
            scored("l0", 1.0, None, 2, true),
        ];
        let summary = summarize_entity_tracking(&scores, &questions);
        assert_eq!(summary.latest_pct, 1.0);
        assert_eq!(summary.all_pct, 0.5);
        assert!((summary.mean_kendall.unwrap() - 0.665).abs() < 1e-9);
    }

    #[test]
    fn csv_rerender_is_stable() {
        let cells = vec![AggregateCell {
            group: "1".into(),
            n: 3,
            mean_f1: 0.5,
            std_f1: 0.1,
        }];
        assert_eq!(render_csv(&cells), render_csv(&cells));
        assert!(render_csv(&cells).contains("1,3,0.500000,0.100000"));
        assert!(render_markdown("By bin", &cells).contains("| 1 | 3 | 0.500 | 0.100 |"));
    }
}
