use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use super::format::fmt_sig;
use super::spec::{CalibrationPoint, CalibrationSpec};
use super::write_with_context;
use crate::datagen::{gen_independent, IndepGenConfig};
use crate::error::{param_err, Result};
use crate::forest::{train_forest, ForestConfig};
use crate::null_model::{pmf_vector, solve_threshold, NullModelParams, Strategy};
use crate::rng::{derive_seed, stream, Domain};

/// Tails below this are not worth tabulating.
const NEGLIGIBLE_TAIL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub point: CalibrationPoint,
    pub kappa: u64,
    /// Model tail P(count > kappa), averaged over repetitions.
    pub predicted_tail: f64,
    /// Fraction of features with count > kappa, averaged over repetitions.
    pub observed_fpr: f64,
    pub observed_min: f64,
    pub observed_max: f64,
    pub mean_k: f64,
    pub repetitions: usize,
}

#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub spec: CalibrationSpec,
    pub rows: Vec<CalibrationRow>,
}

struct NullRun {
    counts: Vec<u64>,
    params: NullModelParams,
}

fn null_run(spec: &CalibrationSpec, point: &CalibrationPoint, seed: u64) -> Result<NullRun> {
    let mut gen = IndepGenConfig::new(point.samples, point.features, 0, 0.0).with_seed(derive_seed(seed, Domain::Data, 0));
    gen.sigma = spec.sigma;
    let data = gen_independent(&gen)?;
    let mut config = ForestConfig::new(point.trees, point.subset_size, point.strategy);
    config.bagging_ratio = spec.bagging_ratio;
    config.min_samples_to_split = spec.min_samples_to_split;
    config.max_depth = spec.max_depth;
    config.rng_seed = derive_seed(seed, Domain::Forest, 0);
    let forest = train_forest(&config, &data.dataset)?;
    Ok(NullRun {
        counts: forest.selection_counts().to_vec(),
        params: forest.null_params()?,
    })
}

/// Tails P(count > kappa) for kappa in `0..=k_max`.
fn tails(params: &NullModelParams, k_max: u64) -> Vec<f64> {
    let mut cdf = 0.0;
    pmf_vector(params, k_max)
        .into_iter()
        .map(|p| {
            cdf += p;
            (1.0 - cdf).clamp(0.0, 1.0)
        })
        .collect()
}

fn calibrate_point(spec: &CalibrationSpec, point_index: usize, point: &CalibrationPoint) -> Result<Vec<CalibrationRow>> {
    let point_seed = derive_seed(spec.seed, Domain::Repetition, point_index as u64);
    let runs = (0..spec.repetitions)
        .into_par_iter()
        .map(|r| null_run(spec, point, derive_seed(point_seed, Domain::Repetition, r as u64)))
        .collect::<Result<Vec<_>>>()?;

    let mut k_max = 0;
    for run in &runs {
        let observed = run.counts.iter().copied().max().unwrap_or(0);
        let negligible = solve_threshold(&run.params, NEGLIGIBLE_TAIL)
            .map(|d| d.kappa_star)
            .unwrap_or_else(|_| run.params.node_budget());
        k_max = k_max.max(observed).max(negligible);
    }
    let predicted: Vec<Vec<f64>> = runs.iter().map(|run| tails(&run.params, k_max)).collect();
    let reps = runs.len() as f64;
    let mean_k = runs.iter().map(|r| r.params.avg_internal_nodes()).sum::<f64>() / reps;

    Ok((0..=k_max)
        .map(|kappa| {
            let fractions: Vec<f64> = runs
                .iter()
                .map(|run| {
                    let above = run.counts.iter().filter(|&&c| c > kappa).count();
                    above as f64 / run.counts.len() as f64
                })
                .collect();
            CalibrationRow {
                point: *point,
                kappa,
                predicted_tail: predicted.iter().map(|t| t[kappa as usize]).sum::<f64>() / reps,
                observed_fpr: fractions.iter().sum::<f64>() / reps,
                observed_min: fractions.iter().copied().fold(f64::INFINITY, f64::min),
                observed_max: fractions.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_k,
                repetitions: runs.len(),
            }
        })
        .collect())
}

/// Trains forests on label-independent data at every grid point and tabulates
/// predicted against observed tail fractions per kappa.
pub fn run_null_calibration(spec: &CalibrationSpec) -> Result<CalibrationReport> {
    if spec.repetitions == 0 {
        return param_err("repetitions must be at least 1");
    }
    let mut rows = Vec::new();
    for (i, point) in spec.points.iter().enumerate() {
        rows.extend(calibrate_point(spec, i, point)?);
    }
    Ok(CalibrationReport {
        spec: spec.clone(),
        rows,
    })
}

pub const CALIBRATION_COLUMNS: &[&str] = &[
    "samples",
    "features",
    "subset_size",
    "trees",
    "strategy",
    "kappa",
    "repetitions",
    "mean_k",
    "predicted_tail",
    "observed_fpr",
    "observed_min",
    "observed_max",
];

pub fn write_calibration<W: Write>(report: &CalibrationReport, mut out: W) -> std::io::Result<()> {
    let spec = &report.spec;
    writeln!(out, "# seed={}", spec.seed)?;
    writeln!(out, "# sigma={}", fmt_sig(spec.sigma))?;
    writeln!(out, "# bagging_ratio={}", fmt_sig(spec.bagging_ratio))?;
    writeln!(out, "# min_samples_to_split={}", spec.min_samples_to_split)?;
    match spec.max_depth {
        Some(d) => writeln!(out, "# max_depth={d}")?,
        None => writeln!(out, "# max_depth=none")?,
    }
    writeln!(out, "{}", CALIBRATION_COLUMNS.join(","))?;
    for row in &report.rows {
        let p = &row.point;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            p.samples,
            p.features,
            p.subset_size,
            p.trees,
            p.strategy,
            row.kappa,
            row.repetitions,
            fmt_sig(row.mean_k),
            fmt_sig(row.predicted_tail),
            fmt_sig(row.observed_fpr),
            fmt_sig(row.observed_min),
            fmt_sig(row.observed_max),
        )?;
    }
    Ok(())
}

pub fn write_calibration_to(report: &CalibrationReport, path: &Path) -> Result<()> {
    write_with_context(path, |w| write_calibration(report, w))
}

/// Selection counts of feature 0 in `forests` simulated forests of the pure
/// null selection process: each node draws (or, per tree, reuses) a uniform
/// subset of `subset_size` features and picks its winner uniformly from it.
/// Every tree has exactly `nodes_per_tree` nodes.
pub fn simulate_idealized_counts(
    total_features: usize,
    subset_size: usize,
    num_trees: usize,
    nodes_per_tree: usize,
    strategy: Strategy,
    forests: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    if subset_size == 0 || subset_size > total_features {
        return param_err(format!("subset size must be in [1, {total_features}], got {subset_size}"));
    }
    Ok((0..forests as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Domain::Forest, i);
            let mut count = 0u64;
            for _ in 0..num_trees {
                let mut subset = index::sample(&mut rng, total_features, subset_size);
                for _ in 0..nodes_per_tree {
                    if strategy == Strategy::PerNode {
                        subset = index::sample(&mut rng, total_features, subset_size);
                    }
                    if subset.index(rng.random_range(0..subset_size)) == 0 {
                        count += 1;
                    }
                }
            }
            count
        })
        .collect())
}
