//! Shared fixtures for the criterion benchmarks in `benches/`.

use multisys_core::ingest::clean;
use multisys_core::synth::{generate, GeneratorSpec};
use multisys_core::{compute_indices, Matrix, SchemaConfig, SystemSet};

/// Cleaned features and targets for a default-sized synthetic cohort.
pub fn synthetic_cohort(seed: u64) -> (Matrix, Vec<bool>) {
    let cohort = generate(&GeneratorSpec { seed, ..Default::default() }).expect("default spec generates");
    let (matrix, _) = clean(&cohort, &SchemaConfig::default()).expect("synthetic cells parse");
    let targets = compute_indices(&matrix, &SystemSet::default()).expect("default systems apply").targets();
    (matrix.values().clone(), targets)
}
