//! Shared setup for the benchmarks.

use std::sync::Arc;

use popdyn_core::{GameSpec, PayoffField, SimplexState};

pub use popdyn_core as core;

pub fn builtin(name: &str) -> Arc<dyn PayoffField> {
    GameSpec::builtin(name).build().expect("builtin game")
}

/// Interior start used across runs, so timings compare like with like.
pub fn start(n: usize) -> SimplexState {
    let w: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let total: f64 = w.iter().sum();
    SimplexState::new(w.into_iter().map(|v| v / total).collect()).expect("interior point")
}

/// Deterministic score vector with a spread of magnitudes.
pub fn scores(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 7919) % 23) as f64 - 11.0).collect()
}
