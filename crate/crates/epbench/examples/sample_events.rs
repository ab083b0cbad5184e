//! Sample events and their chapter meta-data, printing the first few.
//!
//! Usage: cargo run --example sample_events [n_events] [seed]

use epbench::eventgen::{generate_events, generate_meta, GeometricParams};
use epbench::universe::{build_universe, bundled_corpus_path, load_corpus};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_events: usize = args.next().map_or(Ok(20), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(17), |s| s.parse())?;
    let corpus = load_corpus(bundled_corpus_path("city_life"))?;
    let universe = build_universe(&corpus, 100, seed)?;
    let params = GeometricParams::new(0.1, 100);
    let events = generate_events(&universe, n_events, params, seed)?;
    let metas = generate_meta(&events, &corpus.style_catalog, seed);
    for (event, meta) in events.iter().zip(&metas).take(5) {
        println!(
            "event {}: {} | {} | {} | {} ({})",
            event.index, event.t, event.s, event.ent, event.c, event.d
        );
        println!(
            "  {} paragraphs, style '{}', placements {:?}",
            meta.nb_paragraphs, meta.style, meta.idx_paragraph
        );
    }
    println!("... {} events total", events.len());
    Ok(())
}
