//! Experiment spec files: `key = value` lines grouped under `[section]`
//! headers, `#` comments. Comma-separated values on grid keys expand into
//! one spec per combination.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forest::ForestConfig;
use crate::null_model::Strategy;

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Independent {
        samples: usize,
        features: usize,
        relevant: usize,
        rho: f64,
        sigma: f64,
    },
    /// Smooth-field source on a `grid_size` x `grid_size` grid, region as a
    /// centered patch of `relevant` cells.
    Correlated {
        grid_size: usize,
        smoothness: f64,
        source_columns: usize,
        samples: usize,
        relevant: usize,
        rho: f64,
    },
}

impl GeneratorSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            GeneratorSpec::Independent { .. } => "independent",
            GeneratorSpec::Correlated { .. } => "correlated",
        }
    }

    pub fn samples(&self) -> usize {
        match *self {
            GeneratorSpec::Independent { samples, .. } | GeneratorSpec::Correlated { samples, .. } => samples,
        }
    }

    pub fn features(&self) -> usize {
        match *self {
            GeneratorSpec::Independent { features, .. } => features,
            GeneratorSpec::Correlated { grid_size, .. } => grid_size * grid_size,
        }
    }

    pub fn relevant(&self) -> usize {
        match *self {
            GeneratorSpec::Independent { relevant, .. } | GeneratorSpec::Correlated { relevant, .. } => relevant,
        }
    }

    pub fn rho(&self) -> f64 {
        match *self {
            GeneratorSpec::Independent { rho, .. } | GeneratorSpec::Correlated { rho, .. } => rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub generator: GeneratorSpec,
    /// Template for every repetition; its seed is replaced per repetition.
    pub forest: ForestConfig,
    pub alphas: Vec<f64>,
    pub repetitions: usize,
    /// Label permutations for the baseline; 0 skips it.
    pub permutations: usize,
    pub seed: u64,
    /// Shuffle feature columns so relevant features do not sit at fixed indices.
    pub shuffle_columns: bool,
    pub output_path: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(generator: GeneratorSpec, forest: ForestConfig, alphas: Vec<f64>, repetitions: usize) -> Self {
        Self {
            generator,
            forest,
            alphas,
            repetitions,
            permutations: 0,
            seed: 0,
            shuffle_columns: true,
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Parameter("repetitions must be at least 1".into()));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::Parameter(format!("alphas must be nonempty and in (0, 1], got {:?}", self.alphas)));
        }
        if self.generator.relevant() > self.generator.features() {
            return Err(Error::Parameter("more relevant features than features".into()));
        }
        Ok(())
    }
}

/// One grid point of a null calibration run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint {
    pub samples: usize,
    pub features: usize,
    pub subset_size: usize,
    pub trees: usize,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSpec {
    pub points: Vec<CalibrationPoint>,
    pub repetitions: usize,
    pub sigma: f64,
    pub bagging_ratio: f64,
    pub min_samples_to_split: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

impl CalibrationSpec {
    pub fn new(points: Vec<CalibrationPoint>, repetitions: usize) -> Self {
        let defaults = ForestConfig::new(0, 1, Strategy::PerNode);
        Self {
            points,
            repetitions,
            sigma: 5.0,
            bagging_ratio: defaults.bagging_ratio,
            min_samples_to_split: defaults.min_samples_to_split,
            max_depth: defaults.max_depth,
            seed: 0,
            output_path: None,
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed `[section] key = value` text.
#[derive(Debug, Clone, Default)]
pub struct SpecFile {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| Error::Spec {
                    line: line_no,
                    msg: format!("unterminated section header '{line}'"),
                })?;
                current = name.trim().to_ascii_lowercase();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Spec {
                line: line_no,
                msg: format!("expected 'key = value', found '{line}'"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::Spec {
                    line: line_no,
                    msg: "empty key".into(),
                });
            }
            let section = sections.entry(current.clone()).or_default();
            if section.contains_key(&key) {
                return Err(Error::Spec {
                    line: line_no,
                    msg: format!("duplicate key '{key}'"),
                });
            }
            section.insert(
                key,
                Entry {
                    value: value.trim().to_string(),
                    line: line_no,
                },
            );
        }
        Ok(Self { sections })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    pub fn has(&self, section: &str, key: &str) -> bool {
        self.entry(section, key).is_some()
    }

    /// Rejects keys outside `allowed` so typos do not go unnoticed.
    fn check_keys(&self, section: &str, allowed: &[&str]) -> Result<()> {
        if let Some(entries) = self.sections.get(section) {
            for (key, entry) in entries {
                if !allowed.contains(&key.as_str()) {
                    return Err(Error::Spec {
                        line: entry.line,
                        msg: format!("unknown key '{key}' in [{section}]"),
                    });
                }
            }
        }
        Ok(())
    }

    fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        let Some(entry) = self.entry(section, key) else {
            return Ok(None);
        };
        entry
            .value
            .split(',')
            .map(|item| {
                let item = item.trim();
                item.parse::<T>().map_err(|_| Error::Spec {
                    line: entry.line,
                    msg: format!("cannot parse '{item}' for key '{key}'"),
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn scalar<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.list::<T>(section, key)? {
            None => Ok(None),
            Some(mut v) if v.len() == 1 => Ok(v.pop()),
            Some(_) => Err(Error::Spec {
                line: self.entry(section, key).map_or(0, |e| e.line),
                msg: format!("key '{key}' takes a single value"),
            }),
        }
    }

    fn scalar_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.scalar(section, key)?.unwrap_or(default))
    }

    fn list_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<Vec<T>> {
        Ok(self.list(section, key)?.unwrap_or_else(|| vec![default]))
    }

    fn required_list<T: FromStr>(&self, section: &str, key: &str) -> Result<Vec<T>> {
        self.list(section, key)?
            .ok_or_else(|| Error::Parameter(format!("spec is missing required key '{key}' in [{section}]")))
    }

    fn max_depth(&self, section: &str) -> Result<Option<usize>> {
        match self.entry(section, "max_depth") {
            None => Ok(None),
            Some(e) if e.value.eq_ignore_ascii_case("none") => Ok(None),
            Some(_) => self.scalar(section, "max_depth"),
        }
    }

    fn output(&self, section: &str) -> Option<PathBuf> {
        self.entry(section, "output").map(|e| PathBuf::from(&e.value))
    }
}

fn strategy_list(spec: &SpecFile, section: &str) -> Result<Vec<Strategy>> {
    spec.list_or(section, "strategy", Strategy::PerNode)
}

/// Expands a sweep spec into one [`ExperimentSpec`] per grid combination.
/// Grid keys: `samples`, `features`, `relevant` / `relevant_fraction`,
/// `rho`, `trees`, `subset_size`, `strategy`.
pub fn experiments_from_spec(spec: &SpecFile) -> Result<Vec<ExperimentSpec>> {
    spec.check_keys(
        "experiment",
        &["repetitions", "alphas", "seed", "permutations", "output", "shuffle_columns"],
    )?;
    spec.check_keys(
        "generator",
        &[
            "kind",
            "samples",
            "features",
            "relevant",
            "relevant_fraction",
            "rho",
            "sigma",
            "grid_size",
            "smoothness",
            "source_columns",
        ],
    )?;
    spec.check_keys(
        "forest",
        &["trees", "subset_size", "strategy", "bagging_ratio", "min_samples_to_split", "max_depth"],
    )?;

    let repetitions = spec.scalar_or("experiment", "repetitions", 20usize)?;
    let alphas = spec.list_or("experiment", "alphas", 0.05f64)?;
    let seed = spec.scalar_or("experiment", "seed", 0u64)?;
    let permutations = spec.scalar_or("experiment", "permutations", 0usize)?;
    let shuffle_columns = spec.scalar_or("experiment", "shuffle_columns", true)?;
    let output_path = spec.output("experiment");

    let kind: String = spec.scalar_or("generator", "kind", "independent".to_string())?;
    let samples: Vec<usize> = spec.required_list("generator", "samples")?;
    let rhos = spec.list_or("generator", "rho", 0.5f64)?;
    let sigma = spec.scalar_or("generator", "sigma", 5.0f64)?;
    let features: Vec<usize> = match kind.as_str() {
        "independent" => spec.required_list("generator", "features")?,
        "correlated" => spec
            .list_or("generator", "grid_size", 32usize)?
            .into_iter()
            .map(|g| g * g)
            .collect(),
        other => {
            return Err(Error::Spec {
                line: spec.entry("generator", "kind").map_or(0, |e| e.line),
                msg: format!("unknown generator kind '{other}'"),
            })
        }
    };
    let smoothness = spec.scalar_or("generator", "smoothness", 3.0f64)?;
    let source_columns = spec.scalar_or("generator", "source_columns", 315usize)?;
    let relevant_counts: Option<Vec<usize>> = spec.list("generator", "relevant")?;
    let relevant_fractions: Option<Vec<f64>> = spec.list("generator", "relevant_fraction")?;
    if relevant_counts.is_some() && relevant_fractions.is_some() {
        return Err(Error::Spec {
            line: spec.entry("generator", "relevant").map_or(0, |e| e.line),
            msg: "give either 'relevant' or 'relevant_fraction', not both".into(),
        });
    }

    let trees: Vec<usize> = spec.required_list("forest", "trees")?;
    let subset_sizes: Vec<usize> = spec.required_list("forest", "subset_size")?;
    let strategies = strategy_list(spec, "forest")?;
    let bagging_ratio = spec.scalar_or("forest", "bagging_ratio", 0.5f64)?;
    let min_samples_to_split = spec.scalar_or("forest", "min_samples_to_split", 5usize)?;
    let max_depth = spec.max_depth("forest")?;

    let mut out = Vec::new();
    for &s in &samples {
        for &f in &features {
            let relevants: Vec<usize> = match (&relevant_counts, &relevant_fractions) {
                (Some(c), _) => c.clone(),
                (None, Some(fr)) => fr.iter().map(|x| (x * f as f64).round() as usize).collect(),
                (None, None) => vec![0],
            };
            for &n in &relevants {
                for &rho in &rhos {
                    for &t in &trees {
                        for &fnn in &subset_sizes {
                            for &strategy in &strategies {
                                let generator = match kind.as_str() {
                                    "independent" => GeneratorSpec::Independent {
                                        samples: s,
                                        features: f,
                                        relevant: n,
                                        rho,
                                        sigma,
                                    },
                                    _ => GeneratorSpec::Correlated {
                                        grid_size: (f as f64).sqrt().round() as usize,
                                        smoothness,
                                        source_columns,
                                        samples: s,
                                        relevant: n,
                                        rho,
                                    },
                                };
                                let mut forest = ForestConfig::new(t, fnn, strategy);
                                forest.bagging_ratio = bagging_ratio;
                                forest.min_samples_to_split = min_samples_to_split;
                                forest.max_depth = max_depth;
                                let exp = ExperimentSpec {
                                    generator,
                                    forest,
                                    alphas: alphas.clone(),
                                    repetitions,
                                    permutations,
                                    seed,
                                    shuffle_columns,
                                    output_path: output_path.clone(),
                                };
                                exp.validate()?;
                                out.push(exp);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Reads a `[calibration]` section; grid keys are `samples`, `features`,
/// `subset_size`, `trees`, `strategy`.
pub fn calibration_from_spec(spec: &SpecFile) -> Result<CalibrationSpec> {
    let sec = "calibration";
    spec.check_keys(
        sec,
        &[
            "repetitions",
            "seed",
            "samples",
            "features",
            "subset_size",
            "trees",
            "strategy",
            "sigma",
            "bagging_ratio",
            "min_samples_to_split",
            "max_depth",
            "output",
        ],
    )?;
    let samples: Vec<usize> = spec.required_list(sec, "samples")?;
    let features: Vec<usize> = spec.required_list(sec, "features")?;
    let subset_sizes: Vec<usize> = spec.required_list(sec, "subset_size")?;
    let trees: Vec<usize> = spec.required_list(sec, "trees")?;
    let strategies = strategy_list(spec, sec)?;
    let mut points = Vec::new();
    for &s in &samples {
        for &f in &features {
            for &fnn in &subset_sizes {
                for &t in &trees {
                    for &strategy in &strategies {
                        points.push(CalibrationPoint {
                            samples: s,
                            features: f,
                            subset_size: fnn,
                            trees: t,
                            strategy,
                        });
                    }
                }
            }
        }
    }
    let mut cal = CalibrationSpec::new(points, spec.scalar_or(sec, "repetitions", 100usize)?);
    cal.sigma = spec.scalar_or(sec, "sigma", cal.sigma)?;
    cal.bagging_ratio = spec.scalar_or(sec, "bagging_ratio", cal.bagging_ratio)?;
    cal.min_samples_to_split = spec.scalar_or(sec, "min_samples_to_split", cal.min_samples_to_split)?;
    cal.max_depth = spec.max_depth(sec)?;
    cal.seed = spec.scalar_or(sec, "seed", 0u64)?;
    cal.output_path = spec.output(sec);
    if cal.repetitions == 0 {
        return Err(Error::Parameter("repetitions must be at least 1".into()));
    }
    Ok(cal)
}
