//! Planar furniture assembly, end to end: a kinematic SE(2) simulator with
//! proprioceptive / visual / tactile observations, a scripted demonstration
//! collector, dataset machinery (reward labeling, reward-to-go, hindsight
//! relabeling, context windows, a versioned binary container), a small causal
//! transformer with a skill-transition head and a Gaussian policy head trained
//! by a from-scratch reverse-mode tape, and a hierarchical rollout harness
//! with metrics, noise sweeps, ablations, and a zero-shot transfer check.
//!
//! The runnable entry points live in two places:
//!
//! * `examples/` — one self-contained program per capability
//!   (`cargo run -p legwork --release --example simulate`, `collect`,
//!   `relabel`, `train`, `rollout`, `evaluate`, `noise_sweep`, `gradcheck`).
//! * a thin CLI bin (`cargo run -p legwork --release -- <subcommand>`) with
//!   subcommands `collect`, `train`, `eval`, `sweep`, `ablate`, `generalize`,
//!   `export-embeddings`, and `grad-check`.

pub mod config;
pub mod data;
pub mod env;
pub mod error;
pub mod heuristic;
pub mod metrics;
pub mod model;
pub mod pose;
pub mod rollout;
pub mod train;

pub mod cli;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
