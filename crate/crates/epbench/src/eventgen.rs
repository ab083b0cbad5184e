//! Event sampling under the truncated geometric distribution.
//!
//! Universe indices for each event component are drawn i.i.d. from a
//! geometric distribution truncated to the universe size, which makes some
//! dates, places, entities and contents recur across many events while most
//! appear once. Candidates that would violate the uniqueness constraints
//! (no two events share a (t, ent) or (t, s) pair) are rejected inside a
//! single forward RNG stream, so shorter runs are prefixes of longer ones.

use crate::seed::{rng_from, sub_rng};
use crate::universe::Universe;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricParams {
    /// Success probability, strictly inside (0, 1).
    pub p: f64,
    /// Truncation point; equals the universe size.
    pub support_size: usize,
}

impl GeometricParams {
    pub fn new(p: f64, support_size: usize) -> Self {
        assert!(p > 0.0 && p < 1.0, "p must be in (0, 1)");
        assert!(support_size >= 1);
        Self { p, support_size }
    }
}

#[derive(Debug, Error)]
pub enum EventGenError {
    #[error("index {index} outside support 0..{support}")]
    OutOfSupport { index: usize, support: usize },
    #[error("exhausted {cap} candidates after accepting {accepted} events")]
    ExhaustedAttempts { cap: usize, accepted: usize },
}

/// P(X = i) for the geometric distribution truncated to {0..N-1}.
pub fn truncated_geometric_pmf(i: usize, params: GeometricParams) -> Result<f64, EventGenError> {
    let GeometricParams { p, support_size } = params;
    if i >= support_size {
        return Err(EventGenError::OutOfSupport {
            index: i,
            support: support_size,
        });
    }
    let q = 1.0 - p;
    Ok(q.powi(i as i32) * p / (1.0 - q.powi(support_size as i32)))
}

/// Inverse-CDF draw from the truncated geometric.
pub fn sample_truncated_geometric(rng: &mut impl Rng, params: GeometricParams) -> usize {
    let q = 1.0 - params.p;
    let z = 1.0 - q.powi(params.support_size as i32);
    // Inverse CDF on the unnormalized mass: u is uniform on [0, z) and
    // cum accumulates q^i * p, so the first index with u < cum is the draw.
    let u: f64 = rng.gen::<f64>() * z;
    let mut cum = 0.0;
    for i in 0..params.support_size {
        cum += q.powi(i as i32) * params.p;
        if u < cum {
            return i;
        }
    }
    params.support_size - 1
}

/// One benchmark event: the (t, s, ent, c, d) tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub index: usize,
    pub t: String,
    pub s: String,
    pub ent: String,
    pub c: String,
    pub d: String,
}

/// Sample `n_events` events from the universe.
///
/// Rejection is per candidate within one RNG stream: a candidate sharing a
/// (t, ent) or (t, s) pair with an already accepted event is discarded and
/// sampling continues. This guarantees prefix stability: with equal inputs,
/// the first N1 events of an N2-event run (N1 < N2) are identical.
pub fn generate_events(
    universe: &Universe,
    n_events: usize,
    params: GeometricParams,
    seed: u64,
) -> Result<Vec<Event>, EventGenError> {
    assert!(n_events >= 1);
    assert_eq!(params.support_size, universe.n_universe);
    let mut rng = rng_from(seed);
    let mut events = Vec::with_capacity(n_events);
    let mut used_t_ent: HashSet<(usize, usize)> = HashSet::new();
    let mut used_t_s: HashSet<(usize, usize)> = HashSet::new();
    let cap = 100 * n_events;
    let mut candidates = 0;
    while events.len() < n_events {
        if candidates >= cap {
            return Err(EventGenError::ExhaustedAttempts {
                cap,
                accepted: events.len(),
            });
        }
        candidates += 1;
        let it = sample_truncated_geometric(&mut rng, params);
        let is = sample_truncated_geometric(&mut rng, params);
        let ie = sample_truncated_geometric(&mut rng, params);
        let ic = sample_truncated_geometric(&mut rng, params);
        let content = &universe.contents[ic];
        let details = &universe.content_details[content];
        let id = rng.gen_range(0..details.len());
        if used_t_ent.contains(&(it, ie)) || used_t_s.contains(&(it, is)) {
            continue;
        }
        used_t_ent.insert((it, ie));
        used_t_s.insert((it, is));
        events.push(Event {
            index: events.len(),
            t: universe.temporal[it].clone(),
            s: universe.spatial[is].clone(),
            ent: universe.entities[ie].clone(),
            c: content.clone(),
            d: details[id].clone(),
        });
    }
    Ok(events)
}

/// Paragraph indices (1-based) where each event feature must appear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParagraphPlacement {
    pub date: usize,
    pub location: usize,
    pub entity: usize,
    pub content: usize,
}

/// Per-chapter generation constraints attached to an event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMeta {
    pub nb_paragraphs: usize,
    pub idx_paragraph: ParagraphPlacement,
    pub style: String,
}

/// Sample chapter metadata for each event.
///
/// Each event draws from its own sub-stream keyed by the event index, so
/// metadata can be generated in any order or in parallel.
pub fn generate_meta(
    events: &[Event],
    style_catalog: &BTreeMap<String, Vec<String>>,
    seed: u64,
) -> Vec<EventMeta> {
    assert!(!events.is_empty());
    let styles: Vec<&String> = style_catalog.keys().collect();
    events
        .iter()
        .map(|event| {
            let mut rng = sub_rng(seed, "meta", event.index as u64);
            let nb_paragraphs = rng.gen_range(1..=10);
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| rng.gen_range(1..=nb_paragraphs);
            let date = draw(&mut rng);
            let location = draw(&mut rng);
            let entity = draw(&mut rng);
            let content = draw(&mut rng);
            let style = styles[rng.gen_range(0..styles.len())].clone();
            EventMeta {
                nb_paragraphs,
                idx_paragraph: ParagraphPlacement {
                    date,
                    location,
                    entity,
                    content,
                },
                style,
            }
        })
        .collect()
}

/// The five repetition-count bins used throughout question selection.
pub const BIN_LABELS: [&str; 5] = ["0", "1", "2", "3-5", "6+"];

/// Label for a repetition count under the {0, 1, 2, 3-5, 6+} binning.
pub fn bin_label(count: usize) -> &'static str {
    match count {
        0 => "0",
        1 => "1",
        2 => "2",
        3..=5 => "3-5",
        _ => "6+",
    }
}

/// Index distribution plugged into the Monte Carlo bin estimator.
#[derive(Debug, Clone, Copy)]
pub enum IndexDistribution {
    Geometric(GeometricParams),
    Uniform { support_size: usize },
}

/// Per-bin Monte Carlo estimate of how many distinct universe items appear
/// with each repetition count among `n_events` i.i.d. index draws.
///
/// Returns (mean, standard deviation) keyed by bin label, over `reps`
/// repetitions. Bins with zero counts in every repetition still appear.
pub fn expected_bin_counts(
    n_events: usize,
    dist: IndexDistribution,
    reps: usize,
    seed: u64,
) -> BTreeMap<&'static str, (f64, f64)> {
    let mut totals: HashMap<&'static str, Vec<f64>> = HashMap::new();
    for label in BIN_LABELS {
        totals.insert(label, Vec::with_capacity(reps));
    }
    for rep in 0..reps {
        let mut rng = sub_rng(seed, "bincount", rep as u64);
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for _ in 0..n_events {
            let idx = match dist {
                IndexDistribution::Geometric(params) => {
                    sample_truncated_geometric(&mut rng, params)
                }
                IndexDistribution::Uniform { support_size } => rng.gen_range(0..support_size),
            };
            *counts.entry(idx).or_insert(0) += 1;
        }
        let mut per_bin: HashMap<&'static str, usize> = HashMap::new();
        for &count in counts.values() {
            *per_bin.entry(bin_label(count)).or_insert(0) += 1;
        }
        for label in BIN_LABELS {
            totals
                .get_mut(label)
                .unwrap()
                .push(*per_bin.get(label).unwrap_or(&0) as f64);
        }
    }
    BIN_LABELS
        .iter()
        .map(|&label| {
            let values = &totals[label];
            let n = values.len().max(1) as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (label, (mean, var.sqrt()))
        })
        .collect()
}
