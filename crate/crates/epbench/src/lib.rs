//! Synthetic episodic-memory benchmark generator and evaluation harness.
//!
//! The crate builds contamination-free narrative benchmarks in four stages:
//! a closed [`universe`] of dates, locations, entities and event contents;
//! seeded [`eventgen`] sampling under a truncated geometric distribution;
//! constraint-verified chapter generation and assembly in [`bookgen`] and
//! [`verifier`]; and cue/trace question synthesis in [`qagen`]. Models are
//! exercised through [`harness`] (in-context, RAG, fine-tune export) and
//! scored with judge-assisted lenient F1 and Kendall's tau in [`evaluator`],
//! with table-shaped aggregation in [`report`].
//!
//! All external model traffic goes through [`gateway`], which provides
//! retries, rate limiting and a deterministic record/replay cache so the
//! whole pipeline runs offline once a cache is populated. [`mock`] supplies
//! constraint-satisfying offline stand-ins for every model role.

pub mod bookgen;
pub mod eventgen;
pub mod evaluator;
pub mod gateway;
pub mod harness;
pub mod jsonx;
pub mod mock;
pub mod pipeline;
pub mod prompts;
pub mod qagen;
pub mod report;
pub mod seed;
pub mod universe;
pub mod verifier;
