//! Shared fixtures for the criterion benchmarks in `benches/`.

use lofa_core::graph::scale_free;
use lofa_core::{seeded_rng, Graph};

/// Preferential-attachment graph with weighted-cascade probabilities.
pub fn wc_scale_free(n: usize, attach: usize, seed: u64) -> Graph {
    let mut rng = seeded_rng(seed, 0);
    scale_free(n, attach, &mut rng).expect("valid generator parameters").weighted_cascade()
}
