//! Monte Carlo repetition-bin statistics for the index distributions.
//!
//! Reproduces the expected counts of universe items drawn once, twice,
//! three-to-five, or six-plus times under the truncated geometric versus
//! the uniform distribution.

use epbench::eventgen::{expected_bin_counts, GeometricParams, IndexDistribution};

fn main() {
    let geometric = IndexDistribution::Geometric(GeometricParams::new(0.1, 100));
    let uniform = IndexDistribution::Uniform { support_size: 100 };
    println!("{:<10} {:<10} {:>12} {:>12} {:>12} {:>12}", "n_events", "dist", "1", "2", "3-5", "6+");
    for n_events in [20, 200] {
        for (name, dist) in [("geometric", geometric), ("uniform", uniform)] {
            let bins = expected_bin_counts(n_events, dist, 10_000, 0);
            let cell = |label: &str| {
                let (mean, std) = bins[label];
                format!("{mean:.1}±{std:.1}")
            };
            println!(
                "{:<10} {:<10} {:>12} {:>12} {:>12} {:>12}",
                n_events, name, cell("1"), cell("2"), cell("3-5"), cell("6+")
            );
        }
    }
}
