use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::format::{fmt_opt, fmt_sig};
use super::spec::{ExperimentSpec, GeneratorSpec};
use super::{compute_rates, write_with_context};
use crate::datagen::{
    fit_latent_model, gen_correlated, gen_independent, make_synthetic_source, IndepGenConfig, LatentModel, Region,
    SyntheticData,
};
use crate::error::{Error, Result};
use crate::forest::{train_forest, ForestConfig};
use crate::permtest::{mark_relevant, permutation_pvalues};
use crate::null_model::solve_threshold;
use crate::rng::{derive_seed, stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    NullModel,
    Permutation,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::NullModel => "null-model",
            Method::Permutation => "permutation",
        }
    }
}

/// Outcome of one method at one alpha in one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaOutcome {
    pub alpha: f64,
    pub method: Method,
    /// `None` for the permutation method or an infeasible threshold.
    pub kappa_star: Option<u64>,
    pub tail_prob: Option<f64>,
    pub selected: Vec<usize>,
    pub fpr: f64,
    pub fnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionRecord {
    pub index: usize,
    pub seed: u64,
    /// Mean internal node count of the trained forest.
    pub forest_k: f64,
    /// K handed to the threshold solver.
    pub solver_k: f64,
    pub relevant: Vec<usize>,
    pub selection_counts: Vec<u64>,
    pub outcomes: Vec<AlphaOutcome>,
}

/// Averages over repetitions for one (method, alpha).
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub method: Method,
    pub alpha: f64,
    pub fpr: f64,
    pub fnr: Option<f64>,
    pub tpr: Option<f64>,
    pub predicted_tail: Option<f64>,
    pub kappa_star: Option<f64>,
    pub mean_k: f64,
    pub repetitions: usize,
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub spec: ExperimentSpec,
    pub rows: Vec<RateRow>,
    pub records: Vec<RepetitionRecord>,
}

impl RateReport {
    pub fn row(&self, method: Method, alpha: f64) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.method == method && r.alpha == alpha)
    }
}

pub const CSV_COLUMNS: &[&str] = &[
    "generator",
    "samples",
    "features",
    "relevant",
    "rho",
    "strategy",
    "trees",
    "subset_size",
    "bagging_ratio",
    "method",
    "alpha",
    "repetitions",
    "mean_k",
    "kappa_star",
    "predicted_tail",
    "fpr",
    "fnr",
    "tpr",
];

/// Data source for a sweep; the correlated model is fitted once and shared by
/// all repetitions.
enum Source {
    Independent,
    Correlated { model: LatentModel, region: Region },
}

fn build_source(spec: &ExperimentSpec) -> Result<Source> {
    match spec.generator {
        GeneratorSpec::Independent { .. } => Ok(Source::Independent),
        GeneratorSpec::Correlated {
            grid_size,
            smoothness,
            source_columns,
            relevant,
            ..
        } => {
            let seed = derive_seed(spec.seed, Domain::Source, 0);
            let source = make_synthetic_source(grid_size, smoothness, source_columns, seed)?;
            let model = fit_latent_model(&source)?;
            let region = if relevant == 0 {
                Region::empty(grid_size * grid_size)
            } else {
                Region::patch(grid_size, (grid_size / 2, grid_size / 2), relevant)?
            };
            Ok(Source::Correlated { model, region })
        }
    }
}

fn generate(spec: &ExperimentSpec, source: &Source, rep_seed: u64) -> Result<SyntheticData> {
    let data_seed = derive_seed(rep_seed, Domain::Data, 0);
    let mut data = match (&spec.generator, source) {
        (
            &GeneratorSpec::Independent {
                samples,
                features,
                relevant,
                rho,
                sigma,
            },
            _,
        ) => {
            let mut cfg = IndepGenConfig::new(samples, features, relevant, rho).with_seed(data_seed);
            cfg.sigma = sigma;
            gen_independent(&cfg)?
        }
        (&GeneratorSpec::Correlated { samples, rho, .. }, Source::Correlated { model, region }) => {
            gen_correlated(model, region, rho, samples, data_seed)?
        }
        _ => return Err(Error::Parameter("generator and data source disagree".into())),
    };
    if spec.shuffle_columns {
        data.shuffle_columns(&mut stream(rep_seed, Domain::Columns, 0))?;
    }
    Ok(data)
}

fn run_repetition(spec: &ExperimentSpec, source: &Source, index: usize) -> Result<RepetitionRecord> {
    let seed = derive_seed(spec.seed, Domain::Repetition, index as u64);
    let data = generate(spec, source, seed)?;
    let config = ForestConfig {
        rng_seed: derive_seed(seed, Domain::Forest, 0),
        ..spec.forest.clone()
    };
    let forest = train_forest(&config, &data.dataset)?;
    let params = forest.null_params()?;
    let counts = forest.selection_counts();
    let f = data.dataset.feature_count();

    let mut outcomes = Vec::new();
    for &alpha in &spec.alphas {
        let (kappa_star, tail_prob, selected) = match solve_threshold(&params, alpha) {
            Ok(d) => {
                let selected = (0..f).filter(|&j| counts[j] > d.kappa_star).collect();
                (Some(d.kappa_star), Some(d.tail_prob), selected)
            }
            Err(Error::Infeasible { .. }) => {
                log::warn!("repetition {index}: no threshold reaches alpha {alpha}; nothing selected");
                (None, None, Vec::new())
            }
            Err(e) => return Err(e),
        };
        let (fpr, fnr) = compute_rates(&selected, &data.relevant, f);
        outcomes.push(AlphaOutcome {
            alpha,
            method: Method::NullModel,
            kappa_star,
            tail_prob,
            selected,
            fpr,
            fnr,
        });
    }

    if spec.permutations > 0 {
        let mut perm = permutation_pvalues(&data.dataset, &config, spec.permutations)?;
        for &alpha in &spec.alphas {
            perm.check_resolution(alpha);
            let selected = mark_relevant(&perm, alpha);
            let (fpr, fnr) = compute_rates(&selected, &data.relevant, f);
            outcomes.push(AlphaOutcome {
                alpha,
                method: Method::Permutation,
                kappa_star: None,
                tail_prob: None,
                selected,
                fpr,
                fnr,
            });
        }
    }

    Ok(RepetitionRecord {
        index,
        seed,
        forest_k: forest.avg_internal_nodes(),
        solver_k: params.avg_internal_nodes(),
        relevant: data.relevant,
        selection_counts: counts.to_vec(),
        outcomes,
    })
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values.flatten() {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn aggregate(spec: &ExperimentSpec, records: &[RepetitionRecord]) -> Vec<RateRow> {
    let reps = records.len();
    let mean_k = records.iter().map(|r| r.forest_k).sum::<f64>() / reps as f64;
    let mut methods = vec![Method::NullModel];
    if spec.permutations > 0 {
        methods.push(Method::Permutation);
    }
    let mut rows = Vec::new();
    for method in methods {
        for &alpha in &spec.alphas {
            let picked: Vec<&AlphaOutcome> = records
                .iter()
                .filter_map(|r| r.outcomes.iter().find(|o| o.method == method && o.alpha == alpha))
                .collect();
            let fpr = picked.iter().map(|o| o.fpr).sum::<f64>() / reps as f64;
            let fnr = mean_opt(picked.iter().map(|o| o.fnr));
            rows.push(RateRow {
                method,
                alpha,
                fpr,
                fnr,
                tpr: fnr.map(|x| 1.0 - x),
                predicted_tail: mean_opt(picked.iter().map(|o| o.tail_prob)),
                kappa_star: mean_opt(picked.iter().map(|o| o.kappa_star.map(|k| k as f64))),
                mean_k,
                repetitions: reps,
            });
        }
    }
    rows
}

/// Runs every repetition of `spec` (in parallel, results kept in repetition
/// order) and averages rates per method and alpha.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<RateReport> {
    spec.validate()?;
    let source = build_source(spec)?;
    let records = (0..spec.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(spec, &source, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport {
        spec: spec.clone(),
        rows: aggregate(spec, &records),
        records,
    })
}

/// Writes reports as one CSV table. Settings that are not columns go into
/// `#` comment lines at the top.
pub fn write_reports<W: Write>(reports: &[RateReport], mut out: W) -> std::io::Result<()> {
    if let Some(first) = reports.first() {
        let spec = &first.spec;
        writeln!(out, "# seed={}", spec.seed)?;
        writeln!(out, "# min_samples_to_split={}", spec.forest.min_samples_to_split)?;
        match spec.forest.max_depth {
            Some(d) => writeln!(out, "# max_depth={d}")?,
            None => writeln!(out, "# max_depth=none")?,
        }
        writeln!(out, "# permutations={}", spec.permutations)?;
        writeln!(out, "# shuffle_columns={}", spec.shuffle_columns)?;
    }
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    for report in reports {
        let g = &report.spec.generator;
        let fc = &report.spec.forest;
        for row in &report.rows {
            let fields = [
                g.kind().to_string(),
                g.samples().to_string(),
                g.features().to_string(),
                g.relevant().to_string(),
                fmt_sig(g.rho()),
                fc.strategy.to_string(),
                fc.num_trees.to_string(),
                fc.subset_size.to_string(),
                fmt_sig(fc.bagging_ratio),
                row.method.as_str().to_string(),
                fmt_sig(row.alpha),
                row.repetitions.to_string(),
                fmt_sig(row.mean_k),
                fmt_opt(row.kappa_star),
                fmt_opt(row.predicted_tail),
                fmt_sig(row.fpr),
                fmt_opt(row.fnr),
                fmt_opt(row.tpr),
            ];
            writeln!(out, "{}", fields.join(","))?;
        }
    }
    Ok(())
}

pub fn write_reports_to(reports: &[RateReport], path: &Path) -> Result<()> {
    write_with_context(path, |w| write_reports(reports, w))
}

pub fn reports_to_string(reports: &[RateReport]) -> String {
    let mut buf = Vec::new();
    write_reports(reports, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::null_model::Strategy;

    fn small_spec(relevant: usize, alphas: Vec<f64>) -> ExperimentSpec {
        let generator = GeneratorSpec::Independent {
            samples: 40,
            features: 30,
            relevant,
            rho: 0.6,
            sigma: 5.0,
        };
        let mut spec = ExperimentSpec::new(generator, ForestConfig::new(6, 4, Strategy::PerNode), alphas, 3);
        spec.seed = 5;
        spec
    }

    #[test]
    fn alpha_one_flags_every_selected_feature() {
        let mut spec = small_spec(0, vec![1.0]);
        spec.repetitions = 1;
        let report = run_sweep(&spec).unwrap();
        let rec = &report.records[0];
        let out = &rec.outcomes[0];
        assert_eq!(out.kappa_star, Some(0));
        let expected: Vec<usize> = (0..30).filter(|&j| rec.selection_counts[j] >= 1).collect();
        assert_eq!(out.selected, expected);
        assert_eq!(out.fnr, None);
        assert_eq!(out.fpr, expected.len() as f64 / 30.0);
    }

    #[test]
    fn reported_k_matches_solver() {
        let report = run_sweep(&small_spec(3, vec![0.05])).unwrap();
        for rec in &report.records {
            assert_eq!(rec.forest_k, rec.solver_k);
        }
        let mean = report.records.iter().map(|r| r.forest_k).sum::<f64>() / 3.0;
        assert_eq!(report.rows[0].mean_k, mean);
    }

    #[test]
    fn rows_satisfy_rate_invariants() {
        let mut spec = small_spec(3, vec![0.2, 0.05]);
        spec.permutations = 9;
        let report = run_sweep(&spec).unwrap();
        assert_eq!(report.rows.len(), 4);
        for row in &report.rows {
            assert!((0.0..=1.0).contains(&row.fpr));
            let (fnr, tpr) = (row.fnr.unwrap(), row.tpr.unwrap());
            assert!((0.0..=1.0).contains(&fnr));
            assert!((tpr - (1.0 - fnr)).abs() < 1e-15);
        }
        assert!(report.row(Method::Permutation, 0.05).unwrap().kappa_star.is_none());
    }

    #[test]
    fn csv_has_comment_header_and_fixed_columns() {
        let report = run_sweep(&small_spec(3, vec![0.05])).unwrap();
        let csv = reports_to_string(&[report]);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines.contains(&"# min_samples_to_split=5"));
        assert!(lines.contains(&"# max_depth=none"));
        let header = lines.iter().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(*header, CSV_COLUMNS.join(","));
        assert_eq!(lines.last().unwrap().split(',').count(), CSV_COLUMNS.len());
    }
}
