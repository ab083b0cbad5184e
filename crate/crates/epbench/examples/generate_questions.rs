//! Instantiate, corrupt and select questions from a mock book.
//!
//! Usage: cargo run --example generate_questions [n_events] [seed]

use epbench::bookgen::{build_book, AuthorConfig};
use epbench::eventgen::{generate_events, generate_meta, GeometricParams};
use epbench::gateway::ModelSpec;
use epbench::mock::MockBookBackend;
use epbench::qagen::{
    bundled_templates_path, generate_empty_questions, instantiate_questions, load_templates,
    select_balanced,
};
use epbench::universe::{build_universe, bundled_corpus_path, load_corpus};
use std::collections::BTreeMap;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_events: usize = args.next().map_or(Ok(20), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(17), |s| s.parse())?;
    let corpus = load_corpus(bundled_corpus_path("city_life"))?;
    let universe = build_universe(&corpus, 100, seed)?;
    let events = generate_events(&universe, n_events, GeometricParams::new(0.1, 100), seed)?;
    let metas = generate_meta(&events, &corpus.style_catalog, seed);
    let backend = MockBookBackend { compliant: true };
    let config = AuthorConfig::new(ModelSpec::new("mock", "mock"), ModelSpec::new("mock", "mock"));
    let book = build_book(
        &backend, &config, &events, &metas, &corpus, &universe, 10, seed, false,
    )?;
    let templates = load_templates(bundled_templates_path())?;
    let mut questions = instantiate_questions(&events, &book, &templates)?;
    let empty = generate_empty_questions(&events, &universe, &book, &templates, seed)?;
    println!("{} non-empty questions, {} empty questions", questions.len(), empty.len());
    questions.extend(empty);
    let selected = select_balanced(&questions, 5, seed);
    let mut per_bin: BTreeMap<String, usize> = BTreeMap::new();
    for q in &selected {
        *per_bin.entry(q.bin.clone()).or_insert(0) += 1;
    }
    println!("{} selected after balancing, per bin: {per_bin:?}", selected.len());
    let sample = &selected[0];
    println!("sample question (template {}, bin {}):", sample.template_id, sample.bin);
    println!("  {}", sample.question_text);
    println!("  ground truth: {:?}", sample.ground_truth.items());
    Ok(())
}
