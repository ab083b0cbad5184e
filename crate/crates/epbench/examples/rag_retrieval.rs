//! Chunk a mock book, embed with the offline hash embedder, and retrieve
//! the top-k chunks for a question.
//!
//! Usage: cargo run --example rag_retrieval [top_k]

use epbench::bookgen::{build_book, AuthorConfig};
use epbench::eventgen::{generate_events, generate_meta, GeometricParams};
use epbench::gateway::ModelSpec;
use epbench::harness::{chunk_book, embed_chunks, retrieve_context, Granularity};
use epbench::mock::{HashEmbedBackend, MockBookBackend};
use epbench::universe::{build_universe, bundled_corpus_path, load_corpus};

fn main() -> anyhow::Result<()> {
    let top_k: usize = std::env::args().nth(1).map_or(Ok(5), |s| s.parse())?;
    let seed = 17;
    let corpus = load_corpus(bundled_corpus_path("city_life"))?;
    let universe = build_universe(&corpus, 100, seed)?;
    let events = generate_events(&universe, 20, GeometricParams::new(0.1, 100), seed)?;
    let metas = generate_meta(&events, &corpus.style_catalog, seed);
    let backend = MockBookBackend { compliant: true };
    let config = AuthorConfig::new(ModelSpec::new("mock", "mock"), ModelSpec::new("mock", "mock"));
    let book = build_book(
        &backend, &config, &events, &metas, &corpus, &universe, 10, seed, false,
    )?;
    let embedder = HashEmbedBackend::default();
    let spec = ModelSpec::new("mock", "hash-embed");
    let mut chunks = chunk_book(&book, Granularity::Paragraph)?;
    embed_chunks(&embedder, &spec, &mut chunks)?;
    println!("{} paragraph chunks embedded", chunks.len());
    let question = format!(
        "Consider all events involving {}. Where did they take place?",
        events[0].ent
    );
    println!("question: {question}");
    let retrieved = retrieve_context(&embedder, &spec, &question, &chunks, top_k)?;
    for chunk in retrieved {
        let preview: String = chunk.text.chars().take(70).collect();
        println!("  [{}] {preview}...", chunk.label);
    }
    Ok(())
}
