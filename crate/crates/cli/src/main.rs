use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use selfreq::datagen::{
    fit_latent_model, gen_correlated, gen_independent, make_synthetic_source, IndepGenConfig, Region,
};
use selfreq::harness::{
    calibration_from_spec, experiments_from_spec, fmt_sig, run_null_calibration, run_sweep, write_calibration,
    write_reports, SpecFile,
};
use selfreq::permtest::{permutation_pvalues, DEFAULT_PERMUTATIONS};
use selfreq::rng::{derive_seed, stream, Domain};
use selfreq::{solve_threshold, train_forest, Dataset, ForestConfig, NullModelParams, Strategy};

#[derive(Parser)]
#[command(name = "selfreq", version, about = "Random forest selection frequency with null-model thresholds")]
struct Cli {
    /// Master seed (overrides the spec file's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment spec file for sweep and calibrate.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Feature subsampling strategy (overrides the spec file).
    #[arg(long, global = true, value_enum)]
    strategy: Option<StrategyArg>,
    /// Dataset CSV files carry a header row (read and written).
    #[arg(long, global = true)]
    header: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    PerNode,
    PerTree,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::PerNode => Strategy::PerNode,
            StrategyArg::PerTree => Strategy::PerTree,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset plus a sidecar CSV of relevant indices.
    Gen(GenArgs),
    /// Train a forest and write per-feature selection counts.
    Train(TrainArgs),
    /// Solve the null-model threshold for given forest parameters.
    Threshold(ThresholdArgs),
    /// Label-permutation p-values for every feature.
    Permtest(PermtestArgs),
    /// Run a full experiment sweep from a spec file.
    Sweep,
    /// Run a null calibration grid from a spec file.
    Calibrate,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorKind {
    Independent,
    Correlated,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "independent")]
    generator: GeneratorKind,
    #[arg(long)]
    samples: usize,
    /// Feature count (independent generator).
    #[arg(long, default_value_t = 100)]
    features: usize,
    #[arg(long, default_value_t = 0)]
    relevant: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 5.0)]
    sigma: f64,
    /// Grid side length (correlated generator); F = grid_size^2.
    #[arg(long, default_value_t = 32)]
    grid_size: usize,
    #[arg(long, default_value_t = 3.0)]
    smoothness: f64,
    #[arg(long, default_value_t = 315)]
    source_columns: usize,
    /// Shuffle feature columns so relevant features are not at fixed indices.
    #[arg(long)]
    shuffle_columns: bool,
}

#[derive(Args)]
struct ForestArgs {
    #[arg(long)]
    trees: usize,
    #[arg(long)]
    subset_size: usize,
    #[arg(long, default_value_t = 0.5)]
    bagging_ratio: f64,
    #[arg(long, default_value_t = 5)]
    min_samples_to_split: usize,
    #[arg(long)]
    max_depth: Option<usize>,
}

impl ForestArgs {
    fn config(&self, strategy: Option<StrategyArg>, seed: Option<u64>) -> ForestConfig {
        let mut c = ForestConfig::new(
            self.trees,
            self.subset_size,
            strategy.map_or(Strategy::PerNode, Strategy::from),
        );
        c.bagging_ratio = self.bagging_ratio;
        c.min_samples_to_split = self.min_samples_to_split;
        c.max_depth = self.max_depth;
        c.rng_seed = seed.unwrap_or(0);
        c
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset CSV: label column first, then features.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    forest: ForestArgs,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long)]
    features: usize,
    #[arg(long)]
    subset_size: usize,
    #[arg(long)]
    trees: usize,
    /// Mean internal nodes per tree.
    #[arg(long)]
    k: f64,
    /// Target false positive rates; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    alpha: Vec<f64>,
}

#[derive(Args)]
struct PermtestArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    forest: ForestArgs,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    permutations: usize,
    /// Warn when this rate cannot be resolved with the given permutations.
    #[arg(long)]
    alpha: Option<f64>,
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish(mut w: Box<dyn Write>, out: Option<&Path>) -> Result<()> {
    w.flush().with_context(|| match out {
        Some(p) => format!("cannot write {}", p.display()),
        None => "cannot write standard output".into(),
    })
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".relevant.csv");
    out.with_file_name(name)
}

fn cmd_gen(cli: &Cli, args: &GenArgs) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let mut data = match args.generator {
        GeneratorKind::Independent => {
            let mut cfg = IndepGenConfig::new(args.samples, args.features, args.relevant, args.rho).with_seed(seed);
            cfg.sigma = args.sigma;
            gen_independent(&cfg)?
        }
        GeneratorKind::Correlated => {
            let g = args.grid_size;
            let source =
                make_synthetic_source(g, args.smoothness, args.source_columns, derive_seed(seed, Domain::Source, 0))?;
            let model = fit_latent_model(&source)?;
            let region = if args.relevant == 0 {
                Region::empty(g * g)
            } else {
                Region::patch(g, (g / 2, g / 2), args.relevant)?
            };
            gen_correlated(&model, &region, args.rho, args.samples, seed)?
        }
    };
    if args.shuffle_columns {
        data.shuffle_columns(&mut stream(seed, Domain::Columns, 0))?;
    }
    let out = cli.out.as_deref();
    let mut w = open_output(out)?;
    data.dataset.write_csv_to(&mut w, cli.header)?;
    finish(w, out)?;
    if let Some(path) = out {
        let side = sidecar_path(path);
        let mut w = open_output(Some(&side))?;
        writeln!(w, "relevant_index")?;
        for j in &data.relevant {
            writeln!(w, "{j}")?;
        }
        finish(w, Some(&side))?;
    }
    Ok(())
}

fn cmd_train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let data = Dataset::read_csv(&args.data, cli.header)?;
    let config = args.forest.config(cli.strategy, cli.seed);
    let forest = train_forest(&config, &data)?;
    let out = cli.out.as_deref();
    let mut w = open_output(out)?;
    writeln!(w, "# trees={}", forest.trees().len())?;
    writeln!(w, "# subset_size={}", config.subset_size)?;
    writeln!(w, "# strategy={}", config.strategy)?;
    writeln!(w, "# avg_internal_nodes={}", fmt_sig(forest.avg_internal_nodes()))?;
    writeln!(w, "feature,count")?;
    for (j, c) in forest.selection_counts().iter().enumerate() {
        writeln!(w, "{j},{c}")?;
    }
    finish(w, out)
}

fn cmd_threshold(cli: &Cli, args: &ThresholdArgs) -> Result<()> {
    let strategy = cli.strategy.map_or(Strategy::PerNode, Strategy::from);
    let params = NullModelParams::new(args.features, args.subset_size, args.trees, args.k, strategy)?;
    let out = cli.out.as_deref();
    let mut w = open_output(out)?;
    writeln!(w, "alpha,kappa_star,tail_prob,expected_fp")?;
    for &alpha in &args.alpha {
        let d = solve_threshold(&params, alpha)?;
        writeln!(
            w,
            "{},{},{},{}",
            fmt_sig(alpha),
            d.kappa_star,
            fmt_sig(d.tail_prob),
            fmt_sig(d.expected_fp)
        )?;
    }
    finish(w, out)
}

fn cmd_permtest(cli: &Cli, args: &PermtestArgs) -> Result<()> {
    let data = Dataset::read_csv(&args.data, cli.header)?;
    let config = args.forest.config(cli.strategy, cli.seed);
    let mut result = permutation_pvalues(&data, &config, args.permutations)?;
    if let Some(alpha) = args.alpha {
        result.check_resolution(alpha);
    }
    for warning in &result.warnings {
        eprintln!("warning: {warning}");
    }
    let out = cli.out.as_deref();
    let mut w = open_output(out)?;
    writeln!(w, "feature,observed_count,p_value")?;
    for (j, (c, p)) in result.observed_counts.iter().zip(&result.p_values).enumerate() {
        writeln!(w, "{j},{c},{}", fmt_sig(*p))?;
    }
    finish(w, out)
}

fn read_spec(cli: &Cli) -> Result<SpecFile> {
    let Some(path) = cli.spec.as_deref() else {
        bail!("this subcommand needs --spec <file>");
    };
    SpecFile::read(path).with_context(|| format!("in spec file {}", path.display()))
}

fn cmd_sweep(cli: &Cli) -> Result<()> {
    let mut specs = experiments_from_spec(&read_spec(cli)?)?;
    if let Some(s) = cli.strategy {
        // a strategy grid collapses to the requested strategy
        let first = specs.first().map(|e| e.forest.strategy);
        specs.retain(|e| Some(e.forest.strategy) == first);
        for spec in &mut specs {
            spec.forest.strategy = Strategy::from(s);
        }
    }
    if let Some(seed) = cli.seed {
        for spec in &mut specs {
            spec.seed = seed;
        }
    }
    let out = cli.out.clone().or_else(|| specs.first().and_then(|s| s.output_path.clone()));
    let reports = specs.iter().map(run_sweep).collect::<selfreq::Result<Vec<_>>>()?;
    let mut w = open_output(out.as_deref())?;
    write_reports(&reports, &mut w)?;
    finish(w, out.as_deref())
}

fn cmd_calibrate(cli: &Cli) -> Result<()> {
    let mut spec = calibration_from_spec(&read_spec(cli)?)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(s) = cli.strategy {
        let first = spec.points.first().map(|p| p.strategy);
        spec.points.retain(|p| Some(p.strategy) == first);
        for p in &mut spec.points {
            p.strategy = Strategy::from(s);
        }
    }
    let out = cli.out.clone().or_else(|| spec.output_path.clone());
    let report = run_null_calibration(&spec)?;
    let mut w = open_output(out.as_deref())?;
    write_calibration(&report, &mut w)?;
    finish(w, out.as_deref())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Threshold(a) => cmd_threshold(cli, a),
        Command::Permtest(a) => cmd_permtest(cli, a),
        Command::Sweep => cmd_sweep(cli),
        Command::Calibrate => cmd_calibrate(cli),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
