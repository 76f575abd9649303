//! Command-line front end: `run`, `sweep`, `gamma` and `baseline-ratio`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::baseline::BaselineTable;
use crate::error::Error;
use crate::experiment::{gamma_ratio, ratio_to_baseline, Experiment, RunConfig};
use crate::posterior::{GridGeometry, ReadoutMode, Resolution};
use crate::report::{
    read_results, write_baseline_ratios, write_gamma, write_results, LabeledAggregate,
};
use crate::strategies::{AxisPolicy, CandidateGrid, CandidateSet, StrategyKind};

/// Fraction of aborted runs above which a batch counts as failed.
pub const MAX_ABORTED_FRACTION: f64 = 0.01;

pub const THREADS_ENV: &str = "QEST_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "qest",
    version,
    about = "Adaptive qubit state estimation simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo average of one strategy, one row per step.
    Run(RunArgs),
    /// Several strategies (default: all) on common random states.
    Sweep(SweepArgs),
    /// Error ratio of a scheme against a reference result file.
    Gamma(GammaArgs),
    /// Ratio of a scheme result to an optimal-fidelity baseline table.
    BaselineRatio(BaselineRatioArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Number of measured systems per run.
    #[arg(long = "n", default_value_t = 30)]
    pub n: usize,
    /// Monte Carlo runs.
    #[arg(long, default_value_t = 2000)]
    pub runs: usize,
    #[arg(long, default_value = "bloch")]
    pub readout: ReadoutMode,
    /// Posterior grid, `<nr>x<ntheta>x<nphi>`.
    #[arg(long, default_value = "24x24x48")]
    pub grid: Resolution,
    /// Kullback candidate grid, `<ntheta>x<nphi>`.
    #[arg(long, default_value = "8x16")]
    pub candidates: CandidateGrid,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "random")]
    pub axis_policy: AxisPolicy,
    /// Locally refine the Kullback optimum around the best candidate.
    #[arg(long)]
    pub refine: bool,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub strategy: StrategyKind,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Strategies to run, repeatable (default: all four).
    #[arg(long)]
    pub strategy: Vec<StrategyKind>,
    /// Prior exponents, repeatable (default: 2).
    #[arg(long)]
    pub alpha: Vec<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct GammaArgs {
    /// Result file of the scheme.
    #[arg(long)]
    pub scheme: PathBuf,
    /// Result file of the reference, usually the random strategy.
    #[arg(long)]
    pub reference: PathBuf,
    /// Select the scheme group when the scheme file holds several.
    #[arg(long)]
    pub strategy: Option<StrategyKind>,
    /// Select the reference group when the reference file holds several.
    #[arg(long, default_value = "random")]
    pub reference_strategy: StrategyKind,
    /// Select groups by prior exponent.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineRatioArgs {
    /// Result file of the scheme.
    #[arg(long)]
    pub scheme: PathBuf,
    /// Baseline CSV with header `N,alpha,F_opt` or `N,alpha,f_opt`.
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long)]
    pub strategy: Option<StrategyKind>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Invalid flags or inputs, detected before any computation.
    Config(String),
    /// I/O failure, unusable input files or failed runs.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

fn config(e: impl ToString) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime(e: impl ToString) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parses `args` (including the program name), executes the command and
/// returns the process exit code. Diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qest: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Gamma(args) => cmd_gamma(args),
        Command::BaselineRatio(args) => cmd_baseline_ratio(args),
    })
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(runtime)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| runtime(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn run_config(kind: StrategyKind, alpha: f64, common: &CommonArgs) -> Result<RunConfig, CliError> {
    if common.runs == 0 {
        return Err(config("--runs must be at least 1"));
    }
    let mut cfg = RunConfig::new(kind, common.n);
    cfg.alpha = alpha;
    cfg.readout = common.readout;
    cfg.resolution = common.grid;
    cfg.seed = common.seed;
    cfg.strategy.candidates = CandidateSet::Grid(common.candidates);
    cfg.strategy.axis_policy = common.axis_policy;
    cfg.strategy.refine = common.refine;
    cfg.validate().map_err(config)?;
    Ok(cfg)
}

/// Validates every configuration, then runs them in order and writes all
/// rows once every batch has finished.
fn run_batches(configs: Vec<RunConfig>, common: &CommonArgs) -> Result<(), CliError> {
    let geometry = GridGeometry::new(common.grid);
    let experiments = configs
        .into_iter()
        .map(|cfg| Experiment::with_geometry(cfg, geometry.clone()).map_err(config))
        .collect::<Result<Vec<_>, _>>()?;
    let mut groups = Vec::with_capacity(experiments.len());
    for exp in &experiments {
        let aggregate = exp.monte_carlo(common.runs).map_err(runtime)?;
        let cfg = exp.config();
        if aggregate.aborted_fraction() > MAX_ABORTED_FRACTION {
            return Err(runtime(format!(
                "{} of {} runs aborted for strategy {} at alpha {}",
                aggregate.aborted, common.runs, cfg.strategy.kind, cfg.alpha
            )));
        }
        if aggregate.aborted > 0 {
            eprintln!(
                "qest: excluded {} aborted runs for strategy {} at alpha {}",
                aggregate.aborted, cfg.strategy.kind, cfg.alpha
            );
        }
        groups.push(LabeledAggregate {
            strategy: cfg.strategy.kind,
            seed: cfg.seed,
            aggregate,
        });
    }
    write_results(output(&common.out)?, &groups).map_err(runtime)
}

pub fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let cfg = run_config(args.strategy, args.alpha, &args.common)?;
    run_batches(vec![cfg], &args.common)
}

pub fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let strategies = if args.strategy.is_empty() {
        StrategyKind::ALL.to_vec()
    } else {
        args.strategy
    };
    let alphas = if args.alpha.is_empty() {
        vec![2.0]
    } else {
        args.alpha
    };
    let mut configs = Vec::new();
    for &kind in &strategies {
        for &alpha in &alphas {
            configs.push(run_config(kind, alpha, &args.common)?);
        }
    }
    run_batches(configs, &args.common)
}

/// Picks the single group matching the optional filters.
fn select(
    groups: Vec<LabeledAggregate>,
    strategy: Option<StrategyKind>,
    alpha: Option<f64>,
    path: &Path,
) -> Result<LabeledAggregate, CliError> {
    let mut matching: Vec<_> = groups
        .into_iter()
        .filter(|g| strategy.is_none_or(|s| g.strategy == s))
        .filter(|g| alpha.is_none_or(|a| g.aggregate.alpha == a))
        .collect();
    match matching.len() {
        1 => Ok(matching.remove(0)),
        0 => Err(config(format!("{}: no matching results", path.display()))),
        n => Err(config(format!(
            "{}: {n} result groups match; select one with --strategy/--alpha",
            path.display()
        ))),
    }
}

fn load_results(path: &Path) -> Result<Vec<LabeledAggregate>, CliError> {
    read_results(open(path)?).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

pub fn cmd_gamma(args: GammaArgs) -> Result<(), CliError> {
    let scheme = select(
        load_results(&args.scheme)?,
        args.strategy,
        args.alpha,
        &args.scheme,
    )?;
    let reference = load_results(&args.reference)?;
    let reference = if reference.len() == 1 {
        reference.into_iter().next().expect("one group")
    } else {
        select(
            reference,
            Some(args.reference_strategy),
            args.alpha,
            &args.reference,
        )?
    };
    let gamma = gamma_ratio(&scheme.aggregate, &reference.aggregate).map_err(config)?;
    write_gamma(
        output(&args.out)?,
        &gamma,
        scheme.strategy,
        reference.strategy,
    )
    .map_err(runtime)
}

pub fn cmd_baseline_ratio(args: BaselineRatioArgs) -> Result<(), CliError> {
    let scheme = select(
        load_results(&args.scheme)?,
        args.strategy,
        args.alpha,
        &args.scheme,
    )?;
    let baseline = BaselineTable::from_csv(open(&args.baseline)?)
        .map_err(|e| runtime(format!("{}: {e}", args.baseline.display())))?;
    let ratios = match ratio_to_baseline(&scheme.aggregate, &baseline) {
        Ok(r) => r,
        Err(e @ (Error::AlphaMismatch(_) | Error::MissingBaseline)) => return Err(config(e)),
        Err(e) => return Err(runtime(e)),
    };
    for r in ratios.iter().filter(|r| r.fidelity_ratio.is_none()) {
        eprintln!(
            "qest: no baseline entry for N={} alpha={}",
            r.n, scheme.aggregate.alpha
        );
    }
    write_baseline_ratios(output(&args.out)?, &ratios, baseline.stores_errors()).map_err(runtime)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_run_flags() {
        let cli = Cli::try_parse_from([
            "qest",
            "run",
            "--strategy",
            "kullback3",
            "--n",
            "10",
            "--runs",
            "5",
            "--alpha",
            "0.5",
            "--readout",
            "mean-radius",
            "--grid",
            "8x8x16",
            "--candidates",
            "4x8",
            "--seed",
            "3",
            "--axis-policy",
            "roundrobin",
            "--refine",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else {
            panic!("expected run");
        };
        let cfg = run_config(args.strategy, args.alpha, &args.common).unwrap();
        assert_eq!(cfg.strategy.kind, StrategyKind::KullbackThreeAxes);
        assert_eq!((cfg.n_systems, cfg.alpha, cfg.seed), (10, 0.5, 3));
        assert_eq!(cfg.readout, ReadoutMode::MeanRadius);
        assert_eq!(cfg.resolution, Resolution::new(8, 8, 16).unwrap());
        assert_eq!(cfg.strategy.axis_policy, AxisPolicy::RoundRobin);
        assert!(cfg.strategy.refine);
    }

    #[test]
    fn rejects_bad_values() {
        for args in [
            vec!["qest", "run", "--strategy", "bogus"],
            vec!["qest", "run", "--strategy", "random", "--grid", "1x8x8"],
            vec!["qest", "run", "--strategy", "random", "--readout", "median"],
            vec!["qest", "run"],
        ] {
            assert!(Cli::try_parse_from(args).is_err());
        }
        let cli = Cli::try_parse_from(["qest", "run", "--strategy", "random", "--n", "0"]).unwrap();
        let Command::Run(args) = cli.command else {
            panic!("expected run");
        };
        assert!(matches!(
            run_config(args.strategy, args.alpha, &args.common),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn exit_codes_are_distinct() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Runtime(String::new()).exit_code(), 1);
    }
}
