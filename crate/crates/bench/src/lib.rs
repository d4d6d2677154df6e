//! Shared fixtures for the benchmarks.

use tsforge::data::simulate_sinusoids;
use tsforge::evaluation::{feature_matrix, FeatureMatrix};
use tsforge::training::data_rng;
use tsforge::{RunConfig, SequenceBatch, Trainer};

/// Default-shaped sinusoids (24 steps, 5 channels).
pub fn sinusoids(n: usize, seed: u64) -> SequenceBatch {
    simulate_sinusoids(n, 24, 5, &mut data_rng(seed))
        .expect("valid simulation arguments")
        .0
}

pub fn features(n: usize, seed: u64) -> FeatureMatrix {
    feature_matrix(&sinusoids(n, seed)).expect("finite sinusoid features")
}

/// A trainer with the default architecture and optimizer settings.
pub fn trainer() -> Trainer {
    Trainer::new(RunConfig::default()).expect("default config is valid")
}
