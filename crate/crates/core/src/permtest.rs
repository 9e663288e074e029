//! Label-permutation baseline for selection-frequency significance.
//!
//! One forest is trained on the original labels and `B` more on label
//! permutations (features untouched). A feature's p-value is the add-one
//! smoothed fraction of permuted forests in which it was selected at least
//! as often as in the original forest.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{param_err, Result};
use crate::forest::{train_forest, ForestConfig};
use crate::rng::{derive_seed, Domain, StreamRng};

/// Permutation count used when none is given.
pub const DEFAULT_PERMUTATIONS: usize = 250;

#[derive(Debug, Clone, PartialEq)]
pub struct PermTestResult {
    pub observed_counts: Vec<u64>,
    /// (1 + #{b : count_b >= observed}) / (B + 1)
    pub p_values: Vec<f64>,
    pub num_permutations: usize,
    pub warnings: Vec<String>,
}

impl PermTestResult {
    /// Smallest attainable p-value, 1 / (B + 1).
    pub fn min_p_value(&self) -> f64 {
        1.0 / (self.num_permutations as f64 + 1.0)
    }

    /// Records a warning when no feature could reach `alpha` with this
    /// many permutations. Returns whether `alpha` is attainable.
    pub fn check_resolution(&mut self, alpha: f64) -> bool {
        if self.min_p_value() <= alpha {
            return true;
        }
        let msg = format!(
            "{} permutations cannot resolve alpha={alpha}: smallest p-value is {:.4}",
            self.num_permutations,
            self.min_p_value()
        );
        log::warn!("{msg}");
        if !self.warnings.contains(&msg) {
            self.warnings.push(msg);
        }
        false
    }
}

/// Seeds for permutation `0..count`, derived from the forest seed.
pub fn permutation_seeds(config: &ForestConfig, count: usize) -> Vec<u64> {
    (0..count as u64)
        .map(|b| derive_seed(config.rng_seed, Domain::Permutation, b))
        .collect()
}

pub fn permutation_pvalues(data: &Dataset, config: &ForestConfig, permutations: usize) -> Result<PermTestResult> {
    permutation_pvalues_with_seeds(data, config, &permutation_seeds(config, permutations))
}

/// As [`permutation_pvalues`], with one explicit seed per permutation. Each
/// seed fixes both the label shuffle and the permuted forest's own seed.
pub fn permutation_pvalues_with_seeds(data: &Dataset, config: &ForestConfig, seeds: &[u64]) -> Result<PermTestResult> {
    if seeds.is_empty() {
        return param_err("permutation test needs at least one permutation");
    }
    let observed = train_forest(config, data)?;
    let observed_counts = observed.selection_counts().to_vec();

    let permuted: Vec<Vec<u64>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = StreamRng::seed_from_u64(seed);
            let mut labels = data.labels().to_vec();
            labels.shuffle(&mut rng);
            let shuffled = data.with_labels(labels)?;
            let cfg = ForestConfig {
                rng_seed: derive_seed(seed, Domain::Forest, 0),
                ..config.clone()
            };
            Ok(train_forest(&cfg, &shuffled)?.selection_counts().to_vec())
        })
        .collect::<Result<_>>()?;

    let b = seeds.len();
    let p_values = observed_counts
        .iter()
        .enumerate()
        .map(|(f, &obs)| {
            let at_least = permuted.iter().filter(|counts| counts[f] >= obs).count();
            (1 + at_least) as f64 / (b + 1) as f64
        })
        .collect();
    Ok(PermTestResult {
        observed_counts,
        p_values,
        num_permutations: b,
        warnings: Vec::new(),
    })
}

/// Features whose permutation p-value is at most `alpha`.
pub fn mark_relevant(result: &PermTestResult, alpha: f64) -> Vec<usize> {
    result
        .p_values
        .iter()
        .enumerate()
        .filter(|(_, &p)| p <= alpha)
        .map(|(f, _)| f)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_independent, IndepGenConfig};
    use crate::null_model::Strategy;

    fn small_null() -> Dataset {
        gen_independent(&IndepGenConfig::new(40, 6, 0, 0.0).with_seed(4)).unwrap().dataset
    }

    #[test]
    fn p_values_are_smoothed_and_bounded() {
        let data = small_null();
        let cfg = ForestConfig::new(5, 2, Strategy::PerNode).with_seed(1);
        let res = permutation_pvalues(&data, &cfg, 19).unwrap();
        assert_eq!(res.num_permutations, 19);
        for &p in &res.p_values {
            assert!((0.05 - 1e-12..=1.0).contains(&p));
            let scaled = p * 20.0;
            assert!((scaled - scaled.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_observed_count_has_p_one() {
        // feature 1 is constant, so it can never be selected
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, 1.0]).collect();
        let labels = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
        let data = Dataset::from_rows(&rows, labels).unwrap();
        let cfg = ForestConfig::new(4, 2, Strategy::PerNode).with_seed(2);
        let res = permutation_pvalues(&data, &cfg, 9).unwrap();
        assert_eq!(res.observed_counts[1], 0);
        assert_eq!(res.p_values[1], 1.0);
    }

    #[test]
    fn strongly_selected_feature_gets_min_p() {
        // feature 0 separates the classes perfectly, the others are noise
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let mut row = vec![i as f64];
                row.extend((1..10).map(|j| ((i * (7 + 4 * j) + j) % 41) as f64));
                row
            })
            .collect();
        let labels = (0..40).map(|i| u8::from(i >= 20)).collect();
        let data = Dataset::from_rows(&rows, labels).unwrap();
        let mut cfg = ForestConfig::new(20, 10, Strategy::PerNode).with_seed(3);
        cfg.max_depth = Some(1);
        let res = permutation_pvalues(&data, &cfg, 19).unwrap();
        assert_eq!(res.observed_counts[0], 20);
        assert_eq!(res.p_values[0], res.min_p_value());
    }

    #[test]
    fn marking_and_resolution() {
        let mut res = PermTestResult {
            observed_counts: vec![5, 1, 3],
            p_values: vec![0.01, 1.0, 0.2],
            num_permutations: 99,
            warnings: vec![],
        };
        assert!(mark_relevant(&res, 0.005).is_empty());
        assert_eq!(mark_relevant(&res, 1.0), vec![0, 1, 2]);
        assert_eq!(mark_relevant(&res, 0.05), vec![0]);
        assert!(res.check_resolution(0.01));
        assert!(!res.check_resolution(0.001));
        assert_eq!(res.warnings.len(), 1);
    }

    #[test]
    fn seed_order_does_not_change_p_values() {
        let data = small_null();
        let cfg = ForestConfig::new(5, 3, Strategy::PerTree).with_seed(6);
        let seeds = permutation_seeds(&cfg, 12);
        let mut reversed = seeds.clone();
        reversed.reverse();
        let a = permutation_pvalues_with_seeds(&data, &cfg, &seeds).unwrap();
        let b = permutation_pvalues_with_seeds(&data, &cfg, &reversed).unwrap();
        assert_eq!(a.p_values, b.p_values);
        assert!(permutation_pvalues_with_seeds(&data, &cfg, &[]).is_err());
    }
}
