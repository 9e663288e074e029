//! Null distribution of per-feature selection counts.
//!
//! Under the null every feature is equally likely to win a node
//! optimization. With a fresh feature subset at every node the forest-level
//! count is binomial over all `round(T*K)` nodes. With one subset per tree the
//! count in a single tree is a mixture (feature absent from the subset, or
//! present and winning each of `round(K)` nodes with probability `1/F_n`), and
//! the forest count is the sum over `T` exchangeable trees. That sum is
//! evaluated either by summing multinomial probabilities over integer
//! partitions of `k`, or by direct `T`-fold convolution; both are exact.

use std::fmt;
use std::str::FromStr;

use crate::error::{param_err, Error, Result};
use crate::logspace::{binomial_pmf, ln_factorial};
use crate::partition::{for_each_partition, multiplicities_of, DEFAULT_PARTITION_CAP};

/// Feature-subsampling strategy used while growing trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// A fresh feature subset at every node.
    PerNode,
    /// One feature subset per tree, shared by all its nodes.
    PerTree,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::PerNode => "per-node",
            Strategy::PerTree => "per-tree",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "per-node" | "pernode" | "node" | "1" | "i" => Ok(Strategy::PerNode),
            "per-tree" | "pertree" | "tree" | "2" | "ii" => Ok(Strategy::PerTree),
            other => param_err(format!("unknown strategy '{other}' (expected per-node or per-tree)")),
        }
    }
}

/// (F, F_n, T, K) plus the strategy the forest was trained with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullModelParams {
    total_features: usize,
    subset_size: usize,
    num_trees: usize,
    avg_internal_nodes: f64,
    strategy: Strategy,
}

impl NullModelParams {
    pub fn new(
        total_features: usize,
        subset_size: usize,
        num_trees: usize,
        avg_internal_nodes: f64,
        strategy: Strategy,
    ) -> Result<Self> {
        if total_features == 0 {
            return param_err("total feature count must be positive");
        }
        if subset_size == 0 || subset_size > total_features {
            return param_err(format!(
                "subset size must be in [1, {total_features}], got {subset_size}"
            ));
        }
        if !avg_internal_nodes.is_finite() || avg_internal_nodes < 0.0 {
            return param_err(format!(
                "average internal node count must be finite and nonnegative, got {avg_internal_nodes}"
            ));
        }
        Ok(Self {
            total_features,
            subset_size,
            num_trees,
            avg_internal_nodes,
            strategy,
        })
    }

    pub fn total_features(&self) -> usize {
        self.total_features
    }

    pub fn subset_size(&self) -> usize {
        self.subset_size
    }

    pub fn num_trees(&self) -> usize {
        self.num_trees
    }

    pub fn avg_internal_nodes(&self) -> f64 {
        self.avg_internal_nodes
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    /// round(T*K): node optimizations in the whole forest.
    pub fn node_budget(&self) -> u64 {
        (self.num_trees as f64 * self.avg_internal_nodes).round() as u64
    }

    /// round(K): node optimizations per tree.
    pub fn nodes_per_tree(&self) -> u64 {
        self.avg_internal_nodes.round() as u64
    }

    /// Largest count with nonzero probability under this model.
    pub fn max_count(&self) -> u64 {
        match self.strategy {
            Strategy::PerNode => self.node_budget(),
            Strategy::PerTree => self.num_trees as u64 * self.nodes_per_tree(),
        }
    }

    fn require(&self, expected: Strategy) -> Result<()> {
        if self.strategy == expected {
            Ok(())
        } else {
            Err(Error::StrategyMismatch {
                expected: expected.as_str(),
                actual: self.strategy.as_str(),
            })
        }
    }
}

/// The threshold chosen for a target false positive rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdDecision {
    pub alpha: f64,
    /// Features selected more than this many times are declared relevant.
    pub kappa_star: u64,
    pub tail_prob: f64,
    pub expected_fp: f64,
}

/// P(count = k) for the per-node strategy: Binomial(round(T*K), 1/F).
pub fn strategy1_pmf(params: &NullModelParams, k: u64) -> Result<f64> {
    params.require(Strategy::PerNode)?;
    Ok(binomial_pmf(k, params.node_budget(), 1.0 / params.total_features as f64))
}

/// Probability that a given feature is in a uniformly drawn subset of size
/// `subset_size`: C(F-1, F_n-1) / C(F, F_n) = F_n / F.
pub fn per_tree_inclusion_prob(total_features: usize, subset_size: usize) -> Result<f64> {
    if total_features == 0 || subset_size == 0 || subset_size > total_features {
        return param_err(format!(
            "need 1 <= subset size <= feature count, got {subset_size} of {total_features}"
        ));
    }
    Ok(subset_size as f64 / total_features as f64)
}

/// Per-tree count pmf for the per-tree strategy, indices 0..=round(K).
fn per_tree_pmf_vector(params: &NullModelParams) -> Vec<f64> {
    let nodes = params.nodes_per_tree();
    let inclusion = params.subset_size as f64 / params.total_features as f64;
    let win = 1.0 / params.subset_size as f64;
    let mut pmf: Vec<f64> = (0..=nodes)
        .map(|xi| binomial_pmf(xi, nodes, win) * inclusion)
        .collect();
    pmf[0] += 1.0 - inclusion;
    pmf
}

/// P(a feature is selected `xi` times in one tree) under the per-tree strategy.
pub fn strategy2_per_tree_pmf(params: &NullModelParams, xi: u64) -> Result<f64> {
    params.require(Strategy::PerTree)?;
    let nodes = params.nodes_per_tree();
    if xi > nodes {
        return Ok(0.0);
    }
    Ok(per_tree_pmf_vector(params)[xi as usize])
}

/// Forest-level pmf at `k` for the per-tree strategy, summed over the
/// integer partitions of `k` (which trees contribute which counts).
pub fn strategy2_pmf_partitions(params: &NullModelParams, k: u64) -> Result<f64> {
    strategy2_pmf_partitions_capped(params, k, DEFAULT_PARTITION_CAP)
}

pub fn strategy2_pmf_partitions_capped(params: &NullModelParams, k: u64, cap: usize) -> Result<f64> {
    params.require(Strategy::PerTree)?;
    if k > cap as u64 {
        return Err(Error::PartitionCap { k: k as usize, cap });
    }
    let per_tree = per_tree_pmf_vector(params);
    let ln_per_tree: Vec<f64> = per_tree.iter().map(|p| p.ln()).collect();
    let trees = params.num_trees;
    let ln_trees_fact = ln_factorial(trees as u64);
    let nodes = params.nodes_per_tree() as usize;

    let mut total = 0.0;
    for_each_partition(k as usize, |parts| {
        let used = parts.len();
        // more nonzero trees than trees, or a tree count above round(K)
        if used > trees || parts.first().is_some_and(|&largest| largest > nodes) {
            return;
        }
        let idle = trees - used;
        let mut ln_term = ln_trees_fact - ln_factorial(idle as u64);
        for (value, count) in multiplicities_of(parts) {
            ln_term += count as f64 * ln_per_tree[value] - ln_factorial(count as u64);
        }
        if idle > 0 {
            ln_term += idle as f64 * ln_per_tree[0];
        }
        total += ln_term.exp();
    });
    Ok(total)
}

/// Forest-level pmf over `0..=k_max` for the per-tree strategy by `T`-fold
/// convolution of the per-tree pmf.
pub fn strategy2_pmf_convolution(params: &NullModelParams, k_max: u64) -> Result<Vec<f64>> {
    params.require(Strategy::PerTree)?;
    Ok(convolve_trees(params, k_max))
}

fn convolve_trees(params: &NullModelParams, k_max: u64) -> Vec<f64> {
    let len = k_max as usize + 1;
    let per_tree = per_tree_pmf_vector(params);
    let mut acc = vec![0.0; len];
    acc[0] = 1.0;
    let mut next = vec![0.0; len];
    let mut reach = 0usize;
    for _ in 0..params.num_trees {
        let new_reach = (reach + per_tree.len() - 1).min(len - 1);
        next[..=new_reach].iter_mut().for_each(|v| *v = 0.0);
        for (i, &a) in acc[..=reach].iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in per_tree.iter().enumerate() {
                let idx = i + j;
                if idx >= len {
                    break;
                }
                next[idx] += a * b;
            }
        }
        std::mem::swap(&mut acc, &mut next);
        reach = new_reach;
    }
    acc
}

/// Null pmf over `0..=k_max` for either strategy.
pub fn pmf_vector(params: &NullModelParams, k_max: u64) -> Vec<f64> {
    match params.strategy {
        Strategy::PerNode => {
            let n = params.node_budget();
            let p = 1.0 / params.total_features as f64;
            (0..=k_max).map(|k| binomial_pmf(k, n, p)).collect()
        }
        Strategy::PerTree => convolve_trees(params, k_max),
    }
}

/// Null pmf at `k` for either strategy. The per-tree strategy goes through
/// the partition sum while `k` is within the default cap and through the
/// convolution above it.
pub fn pmf(params: &NullModelParams, k: u64) -> f64 {
    match params.strategy {
        Strategy::PerNode => {
            binomial_pmf(k, params.node_budget(), 1.0 / params.total_features as f64)
        }
        Strategy::PerTree if k <= DEFAULT_PARTITION_CAP as u64 => {
            strategy2_pmf_partitions(params, k).expect("k within cap and strategy checked")
        }
        Strategy::PerTree => convolve_trees(params, k)[k as usize],
    }
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// P(count > kappa) under the null.
pub fn tail_prob(params: &NullModelParams, kappa: u64) -> f64 {
    if kappa >= params.max_count() {
        return 0.0;
    }
    let cdf: f64 = pmf_vector(params, kappa).iter().sum();
    clamp_unit(1.0 - cdf)
}

/// Expected number of null features selected more than `kappa` times.
pub fn expected_false_positives(params: &NullModelParams, kappa: u64) -> f64 {
    tail_prob(params, kappa) * params.total_features as f64
}

/// Smallest kappa in [0, round(T*K)) whose null tail probability is at most
/// `alpha`, by ascending exhaustive search.
pub fn solve_threshold(params: &NullModelParams, alpha: f64) -> Result<ThresholdDecision> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return param_err(format!("alpha must be in (0, 1], got {alpha}"));
    }
    let budget = params.node_budget();
    let decision = |kappa: u64, tail: f64| ThresholdDecision {
        alpha,
        kappa_star: kappa,
        tail_prob: tail,
        expected_fp: tail * params.total_features as f64,
    };
    if budget == 0 {
        // No node optimizations: every count is zero.
        return Ok(decision(0, tail_prob(params, 0)));
    }

    let max_count = params.max_count();
    let mut computed_to = (budget - 1).min(63).min(max_count);
    let mut pmf = pmf_vector(params, computed_to);
    let mut cdf = 0.0;
    for kappa in 0..budget {
        if kappa >= max_count {
            return Ok(decision(kappa, 0.0));
        }
        if kappa > computed_to {
            // truncated evaluation is exact below the cut, so the running sum stays valid
            computed_to = (2 * computed_to + 1).min(max_count);
            pmf = pmf_vector(params, computed_to);
        }
        cdf += pmf[kappa as usize];
        let tail = clamp_unit(1.0 - cdf);
        if tail <= alpha {
            return Ok(decision(kappa, tail));
        }
    }
    Err(Error::Infeasible { alpha, budget })
}
