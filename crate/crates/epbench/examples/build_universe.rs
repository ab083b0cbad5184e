//! Build a universe from the bundled corpus and print its pools.
//!
//! Usage: cargo run --example build_universe [seed]

use epbench::universe::{build_universe, bundled_corpus_path, load_corpus};

fn main() -> anyhow::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(17), |s| s.parse())?;
    let corpus = load_corpus(bundled_corpus_path("city_life"))?;
    let universe = build_universe(&corpus, 100, seed)?;
    println!("universe seed {seed}, {} items per pool", universe.n_universe);
    println!("first dates:     {:?}", &universe.temporal[..5]);
    println!("first locations: {:?}", &universe.spatial[..5]);
    println!("first entities:  {:?}", &universe.entities[..5]);
    println!("first contents:  {:?}", &universe.contents[..5]);
    let content = &universe.contents[0];
    println!(
        "details for '{}': {:?}",
        content,
        &universe.content_details[content][..3.min(universe.content_details[content].len())]
    );
    Ok(())
}
