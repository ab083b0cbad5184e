//! Run the full pipeline offline and print its summary.
//!
//! Usage: cargo run --example mock_pipeline [n_events] [output_dir]

use epbench::pipeline::{run_pipeline, PipelineConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_events: usize = args.next().map_or(Ok(20), |s| s.parse())?;
    let output_dir = args
        .next()
        .unwrap_or_else(|| "target/mock_run".to_string());
    let config: PipelineConfig = serde_json::from_value(serde_json::json!({
        "seed": 17,
        "n_events": n_events,
        "mock": true,
        "output_dir": output_dir,
    }))?;
    let summary = run_pipeline(&config)?;
    println!("{summary}");
    println!("artifacts written to {}", config.output_dir.display());
    Ok(())
}
