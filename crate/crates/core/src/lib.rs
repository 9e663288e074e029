//! Selection-frequency feature selection for random forests with an
//! approximate null model that turns a target false positive rate into a
//! threshold on how often a feature was chosen as a split variable.

pub mod datagen;
pub mod dataset;
pub mod error;
pub mod forest;
pub mod harness;
pub mod logspace;
pub mod null_model;
pub mod partition;
pub mod permtest;
pub mod rng;
pub mod stats;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use forest::{predict, train_forest, ForestConfig, Stump, TrainedForest};
pub use null_model::{
    expected_false_positives, per_tree_inclusion_prob, pmf, pmf_vector, solve_threshold, strategy1_pmf,
    strategy2_per_tree_pmf, strategy2_pmf_convolution, strategy2_pmf_partitions, tail_prob,
    NullModelParams, Strategy, ThresholdDecision,
};
pub use partition::{enumerate_partitions, Partition};
