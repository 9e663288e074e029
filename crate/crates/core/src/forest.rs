//! Random forests of binary-stump trees with per-feature selection counts.
//!
//! Splits maximize the Gini impurity decrease. Candidate thresholds are the
//! midpoints between consecutive distinct values of a feature on the node's
//! samples, and a sample goes left when its value is below the threshold.
//! Split quality is compared in exact integer arithmetic, so ties are
//! detected exactly and broken by lowest feature index, then smallest
//! threshold.

use rand::seq::index;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{param_err, Error, Result};
use crate::null_model::{NullModelParams, Strategy};
use crate::rng::{stream, Domain, StreamRng};

/// Single-feature threshold test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
}

impl Stump {
    #[inline]
    pub fn goes_left(&self, row: &[f64]) -> bool {
        row[self.feature] < self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        stump: Stump,
        gain: f64,
        left: usize,
        right: usize,
    },
    /// Class counts of the bagged training samples that reached the leaf.
    Leaf { counts: [usize; 2] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    feature_subset: Option<Vec<usize>>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// The subset shared by every node, for trees grown with the per-tree strategy.
    pub fn feature_subset(&self) -> Option<&[usize]> {
        self.feature_subset.as_deref()
    }

    pub fn stumps(&self) -> impl Iterator<Item = &Stump> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { stump, .. } => Some(stump),
            Node::Leaf { .. } => None,
        })
    }

    pub fn internal_node_count(&self) -> usize {
        self.stumps().count()
    }

    /// Majority class of the leaf reached by `row`; ties go to class 0.
    pub fn predict(&self, row: &[f64]) -> u8 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    stump, left, right, ..
                } => at = if stump.goes_left(row) { *left } else { *right },
                Node::Leaf { counts } => return u8::from(counts[1] > counts[0]),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub num_trees: usize,
    pub subset_size: usize,
    pub strategy: Strategy,
    /// Fraction of samples drawn without replacement for each tree.
    pub bagging_ratio: f64,
    pub min_samples_to_split: usize,
    pub max_depth: Option<usize>,
    pub rng_seed: u64,
    /// Train trees on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl ForestConfig {
    pub fn new(num_trees: usize, subset_size: usize, strategy: Strategy) -> Self {
        Self {
            num_trees,
            subset_size,
            strategy,
            bagging_ratio: 0.5,
            min_samples_to_split: 5,
            max_depth: None,
            rng_seed: 0,
            parallel: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    /// Samples per tree: ceil(bagging_ratio * S).
    pub fn bag_size(&self, sample_count: usize) -> usize {
        (self.bagging_ratio * sample_count as f64).ceil() as usize
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        let f = data.feature_count();
        let s = data.sample_count();
        if self.subset_size == 0 || self.subset_size > f {
            return param_err(format!("subset size must be in [1, {f}], got {}", self.subset_size));
        }
        if !(self.bagging_ratio > 0.0 && self.bagging_ratio <= 1.0) {
            return param_err(format!("bagging ratio must be in (0, 1], got {}", self.bagging_ratio));
        }
        if self.min_samples_to_split < 2 {
            return param_err("min_samples_to_split must be at least 2");
        }
        if s < 2 {
            return param_err(format!("training needs at least 2 samples, got {s}"));
        }
        if self.bag_size(s) < 2 {
            return param_err(format!(
                "bagging ratio {} leaves fewer than 2 of {s} samples per tree",
                self.bagging_ratio
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedForest {
    trees: Vec<Tree>,
    selection_counts: Vec<u64>,
    internal_node_counts: Vec<usize>,
    avg_internal_nodes: f64,
    subset_size: usize,
    strategy: Strategy,
}

impl TrainedForest {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Number of nodes at which each feature was the chosen split variable.
    pub fn selection_counts(&self) -> &[u64] {
        &self.selection_counts
    }

    pub fn internal_node_counts(&self) -> &[usize] {
        &self.internal_node_counts
    }

    /// Mean internal node count per tree; zero for an empty forest.
    pub fn avg_internal_nodes(&self) -> f64 {
        self.avg_internal_nodes
    }

    pub fn feature_count(&self) -> usize {
        self.selection_counts.len()
    }

    pub fn subset_size(&self) -> usize {
        self.subset_size
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Null-model parameters measured from this forest.
    pub fn null_params(&self) -> Result<NullModelParams> {
        NullModelParams::new(
            self.feature_count(),
            self.subset_size,
            self.trees.len(),
            self.avg_internal_nodes,
            self.strategy,
        )
    }

    pub fn predict(&self, sample: &[f64]) -> Result<u8> {
        predict(self, sample)
    }
}

/// Gini decrease of splitting `parent` into `left` and `right`. `None` when
/// either side is empty.
pub fn gini_gain(parent: &[u8], left: &[u8], right: &[u8]) -> Option<f64> {
    if left.is_empty() || right.is_empty() {
        return None;
    }
    let gini = |labels: &[u8]| {
        let n = labels.len() as f64;
        let p1 = labels.iter().filter(|&&y| y == 1).count() as f64 / n;
        let p0 = 1.0 - p1;
        1.0 - p0 * p0 - p1 * p1
    };
    let n = parent.len() as f64;
    let gain = gini(parent)
        - left.len() as f64 / n * gini(left)
        - right.len() as f64 / n * gini(right);
    Some(gain.max(0.0))
}

/// Weighted child impurity of a split as the exact fraction
/// (l0*l1*nR + r0*r1*nL) / (nL*nR), proportional to sum_children 2*c0*c1/n.
#[derive(Debug, Clone, Copy)]
struct ChildImpurity {
    num: u128,
    den: u128,
}

impl ChildImpurity {
    fn new(left: [usize; 2], right: [usize; 2]) -> Self {
        let nl = (left[0] + left[1]) as u128;
        let nr = (right[0] + right[1]) as u128;
        Self {
            num: left[0] as u128 * left[1] as u128 * nr + right[0] as u128 * right[1] as u128 * nl,
            den: nl * nr,
        }
    }

    fn less_than(&self, other: &Self) -> bool {
        self.num * other.den < other.num * self.den
    }

    /// Strictly below the parent term P0*P1/N, i.e. a positive gain.
    fn improves_on(&self, parent: [usize; 2]) -> bool {
        let n = (parent[0] + parent[1]) as u128;
        self.num * n < parent[0] as u128 * parent[1] as u128 * self.den
    }

    fn gain(&self, parent: [usize; 2]) -> f64 {
        let n = (parent[0] + parent[1]) as f64;
        let parent_term = parent[0] as f64 * parent[1] as f64 / n;
        let child_term = self.num as f64 / self.den as f64;
        (2.0 * (parent_term - child_term) / n).max(0.0)
    }
}

fn class_counts(data: &Dataset, samples: &[usize]) -> [usize; 2] {
    let ones = samples.iter().filter(|&&s| data.labels()[s] == 1).count();
    [samples.len() - ones, ones]
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) * 0.5;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

/// Best stump over `candidates` on `samples`, or `None` when no split has
/// positive gain. Equal scores go to the earlier candidate (the lowest
/// feature index when `candidates` is sorted), then the smaller threshold.
pub fn optimize_node(data: &Dataset, samples: &[usize], candidates: &[usize]) -> Option<(Stump, f64)> {
    let parent = class_counts(data, samples);
    if parent[0] == 0 || parent[1] == 0 {
        return None;
    }
    let mut features = candidates.to_vec();
    let mut seen = std::collections::HashSet::new();
    features.retain(|f| seen.insert(*f));

    let mut best: Option<(Stump, ChildImpurity)> = None;
    let mut column: Vec<(f64, u8)> = Vec::with_capacity(samples.len());
    for &f in &features {
        column.clear();
        column.extend(samples.iter().map(|&s| (data.value(s, f), data.labels()[s])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0usize; 2];
        for i in 0..column.len() - 1 {
            left[column[i].1 as usize] += 1;
            let (lo, hi) = (column[i].0, column[i + 1].0);
            if lo >= hi {
                continue;
            }
            let right = [parent[0] - left[0], parent[1] - left[1]];
            let score = ChildImpurity::new(left, right);
            if best.as_ref().is_none_or(|(_, b)| score.less_than(b)) {
                best = Some((
                    Stump {
                        feature: f,
                        threshold: midpoint(lo, hi),
                    },
                    score,
                ));
            }
        }
    }
    best.filter(|(_, score)| score.improves_on(parent))
        .map(|(stump, score)| (stump, score.gain(parent)))
}

// Kept in draw order: ties in optimize_node go to the earlier candidate, and a
// sorted subset would hand every tie to the lowest feature index.
fn draw_subset(rng: &mut StreamRng, feature_count: usize, subset_size: usize) -> Vec<usize> {
    index::sample(rng, feature_count, subset_size).into_vec()
}

fn grow_tree(config: &ForestConfig, data: &Dataset, tree_index: usize) -> Tree {
    let mut rng = stream(config.rng_seed, Domain::Tree, tree_index as u64);
    let f = data.feature_count();
    let mut bag = index::sample(&mut rng, data.sample_count(), config.bag_size(data.sample_count())).into_vec();
    bag.sort_unstable();
    let tree_subset = match config.strategy {
        Strategy::PerTree => Some(draw_subset(&mut rng, f, config.subset_size)),
        Strategy::PerNode => None,
    };

    let mut nodes = vec![Node::Leaf { counts: [0, 0] }];
    let mut stack = vec![(0usize, bag, 0usize)];
    while let Some((at, samples, depth)) = stack.pop() {
        let counts = class_counts(data, &samples);
        let splittable = samples.len() >= config.min_samples_to_split
            && config.max_depth.is_none_or(|d| depth < d)
            && counts[0] > 0
            && counts[1] > 0;
        let best = if splittable {
            match &tree_subset {
                Some(subset) => optimize_node(data, &samples, subset),
                None => {
                    let subset = draw_subset(&mut rng, f, config.subset_size);
                    optimize_node(data, &samples, &subset)
                }
            }
        } else {
            None
        };
        let Some((stump, gain)) = best else {
            nodes[at] = Node::Leaf { counts };
            continue;
        };
        let (left_samples, right_samples): (Vec<usize>, Vec<usize>) =
            samples.iter().partition(|&&s| stump.goes_left(data.row(s)));
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { counts: [0, 0] });
        nodes.push(Node::Leaf { counts: [0, 0] });
        nodes[at] = Node::Split {
            stump,
            gain,
            left,
            right,
        };
        // right first so the left subtree is grown (and draws its subsets) first
        stack.push((right, right_samples, depth + 1));
        stack.push((left, left_samples, depth + 1));
    }
    Tree {
        nodes,
        feature_subset: tree_subset,
    }
}

pub fn train_forest(config: &ForestConfig, data: &Dataset) -> Result<TrainedForest> {
    config.validate(data)?;
    let trees: Vec<Tree> = if config.parallel {
        (0..config.num_trees)
            .into_par_iter()
            .map(|t| grow_tree(config, data, t))
            .collect()
    } else {
        (0..config.num_trees).map(|t| grow_tree(config, data, t)).collect()
    };

    let mut selection_counts = vec![0u64; data.feature_count()];
    let mut internal_node_counts = Vec::with_capacity(trees.len());
    for tree in &trees {
        let mut internal = 0;
        for stump in tree.stumps() {
            selection_counts[stump.feature] += 1;
            internal += 1;
        }
        internal_node_counts.push(internal);
    }
    let avg_internal_nodes = if trees.is_empty() {
        0.0
    } else {
        internal_node_counts.iter().sum::<usize>() as f64 / trees.len() as f64
    };
    Ok(TrainedForest {
        trees,
        selection_counts,
        internal_node_counts,
        avg_internal_nodes,
        subset_size: config.subset_size,
        strategy: config.strategy,
    })
}

/// Majority vote of the trees; ties go to class 0.
pub fn predict(forest: &TrainedForest, sample: &[f64]) -> Result<u8> {
    if forest.trees.is_empty() {
        return Err(Error::Parameter("cannot predict with an empty forest".into()));
    }
    if sample.len() != forest.feature_count() {
        return param_err(format!(
            "sample has {} features, forest expects {}",
            sample.len(),
            forest.feature_count()
        ));
    }
    let ones = forest.trees.iter().filter(|t| t.predict(sample) == 1).count();
    Ok(u8::from(2 * ones > forest.trees.len()))
}
