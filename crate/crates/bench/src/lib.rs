//! Shared fixtures for the benchmarks.

use selfreq::datagen::{gen_independent, IndepGenConfig};
use selfreq::Dataset;

/// Independent-feature dataset with `relevant` informative features.
pub fn dataset(samples: usize, features: usize, relevant: usize, seed: u64) -> Dataset {
    gen_independent(&IndepGenConfig::new(samples, features, relevant, 0.5).with_seed(seed))
        .expect("valid generator config")
        .dataset
}
