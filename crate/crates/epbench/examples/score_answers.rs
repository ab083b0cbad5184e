//! Judge freeform answers against ground truth and compute lenient F1.
//!
//! Uses the deterministic offline judge: a correct replayed answer, an
//! abstention on an empty question, and a fabricated answer.

use epbench::evaluator::{compute_f1, judge_answer};
use epbench::gateway::ModelSpec;
use epbench::mock::DeterministicJudgeBackend;

fn main() -> anyhow::Result<()> {
    let judge = DeterministicJudgeBackend;
    let spec = ModelSpec::new("mock", "mock");
    let gt: Vec<String> = ["Lincoln Center", "High Line"].iter().map(|s| s.to_string()).collect();

    let cases = [
        ("complete", gt.clone(), "The answer items are: Lincoln Center; High Line."),
        ("partial", gt.clone(), "The answer items are: Lincoln Center."),
        ("abstain on empty", Vec::new(), "There is no information about this in the book."),
        ("fabricated on empty", Vec::new(), "It happened at Nowhere Plaza."),
    ];
    for (label, gt_items, answer) in cases {
        let verdict = judge_answer(&judge, &spec, "spaces", &gt_items, answer)?;
        let record = compute_f1(&verdict, gt_items.len());
        println!(
            "{label:<20} identified {:?} -> precision {:.2}, recall {:.2}, F1 {:.2}",
            verdict.identified_items, record.precision, record.recall, record.f1
        );
    }
    Ok(())
}
