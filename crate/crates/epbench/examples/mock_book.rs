//! Generate a complete verified book offline with the mock author.
//!
//! Usage: cargo run --example mock_book [n_events] [seed]

use epbench::bookgen::{build_book, AuthorConfig};
use epbench::eventgen::{generate_events, generate_meta, GeometricParams};
use epbench::gateway::ModelSpec;
use epbench::mock::MockBookBackend;
use epbench::universe::{build_universe, bundled_corpus_path, load_corpus};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_events: usize = args.next().map_or(Ok(10), |s| s.parse())?;
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
    println!(
        "{} chapters accepted, {} discarded",
        book.chapters.len(),
        book.discarded_events.len()
    );
    let first = &book.chapters[0];
    println!(
        "chapter 1: {} paragraphs, secondary names {:?}, accepted after {} iteration(s)",
        first.paragraph_count, first.secondary_names, first.iterations_used
    );
    println!("--- excerpt ---");
    for line in book.assembled_text.lines().take(8) {
        println!("{line}");
    }
    Ok(())
}
