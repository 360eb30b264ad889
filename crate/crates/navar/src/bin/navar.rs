//! Command-line frontend: simulate benchmark processes, fit influence
//! networks, reproduce the replication grid, cross-validate, verify tail
//! bounds, and forecast.
//!
//! Every subcommand also reads a flat `key = value` configuration file via
//! `--config`; explicit flags override file values, and the environment
//! variables `NAVAR_WORKERS` and `NAVAR_MASTER_SEED` override worker count
//! and seed over everything else. Exit codes: 0 success, 2 input validation,
//! 3 model or precondition failure, 4 internal error.

use std::env;
use std::fmt::Display;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use navar::design::{DesignCache, Featurizer, DEFAULT_RIDGE_FLOOR};
use navar::error::{Error, Result};
use navar::eval::{
    center_panel, fit_linear_var_baseline, one_step_mse, summarize_cell, table1_replicate,
    ts_cross_validate, CvConfig, CvFamily, CvSelection, ExperimentPlan, LambdaSelection,
    RepOutcome, Table1Cell, DEFAULT_BASIS_SIZE, DEFAULT_BURN_IN, DEFAULT_C0_MULTIPLIER,
};
use navar::func::ComponentFunction;
use navar::io::config::{parse_config, ConfigEntry};
use navar::io::csv::{float_repr, read_panel, write_panel, write_table};
use navar::io::dot::write_influence_graph;
use navar::sim::{
    benchmark_spec, burn_in_shortfall, simulate, AdditiveVarSpec, NoiseKind, PatternKind,
    PatternSpec, TimeSeriesPanel, DEFAULT_MARGIN_POWER,
};
use navar::solver::{fit, FitConfig, FitResult};
use navar::tails::{
    bernstein_envelope, default_c1_grid, default_c2_grid, explicit_bernstein_constants,
    fit_envelope, mc_tail, pilot_long_run_sd, scaled_thresholds, EnvelopeFit,
    LipschitzFunctional, TailEstimate, TailExperiment,
};

const DEFAULT_CV_FOLDS: usize = 5;
const DEFAULT_CV_GRID_POINTS: usize = 30;
const DEFAULT_CV_GRID_FLOOR: f64 = 1e-2;
const DEFAULT_CV_BASIS_SIZES: &str = "2,3,4,6";
const DEFAULT_TAIL_REPS: usize = 100_000;
const DEFAULT_TAIL_LENGTHS: &str = "50,200,800";
const DEFAULT_TAIL_MULTIPLIERS: &str = "0.5,1,1.5,2,2.5,3,3.5";
const PILOT_BATCH: usize = 200;
const PILOT_REPS: usize = 2_000;
const PILOT_SEED: u64 = 777;
const CHECKPOINT_HEADER: &str = "rep,auroc,aupr";

#[derive(Parser)]
#[command(
    name = "navar",
    version,
    about = "Sparse additive nonlinear VAR: simulation, estimation, and network recovery"
)]
struct Cli {
    /// Worker threads for parallel sections (env NAVAR_WORKERS overrides).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a benchmark process and write the panel as CSV.
    Simulate(SimulateArgs),
    /// Fit an influence network to a CSV panel and export JSON + DOT.
    Fit(FitArgs),
    /// Replicate the benchmark grid and write the summary table.
    #[command(name = "eval-table1")]
    EvalTable1(EvalArgs),
    /// Cross-validate penalty and truncation level on a CSV panel.
    Cv(CvArgs),
    /// Estimate tail probabilities and fit a dominating Bernstein envelope.
    Tails(TailsArgs),
    /// One-step forecasts from a fitted model for every row of a panel.
    Predict(PredictArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 2u8,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("navar: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    configure_workers(cli.workers)?;
    match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Fit(args) => run_fit(args),
        Command::EvalTable1(args) => run_eval_table1(args),
        Command::Cv(args) => run_cv(args),
        Command::Tails(args) => run_tails(args),
        Command::Predict(args) => run_predict(args),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing

fn env_parsed<T: FromStr>(name: &str) -> Result<Option<T>>
where
    T::Err: Display,
{
    match env::var(name) {
        Ok(raw) => raw.trim().parse::<T>().map(Some).map_err(|e| {
            Error::InvalidInput(format!("environment variable {name}: bad value {raw:?} ({e})"))
        }),
        Err(env::VarError::NotPresent) => Ok(None),
        Err(env::VarError::NotUnicode(_)) => Err(Error::InvalidInput(format!(
            "environment variable {name} is not valid unicode"
        ))),
    }
}

fn configure_workers(flag: Option<usize>) -> Result<()> {
    let workers = match env_parsed::<usize>("NAVAR_WORKERS")? {
        Some(w) => Some(w),
        None => flag,
    };
    if let Some(workers) = workers {
        if workers == 0 {
            return Err(Error::InvalidInput(
                "worker count must be at least 1".to_string(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("cannot size the worker pool: {e}")))?;
    }
    Ok(())
}

/// Values loaded from `--config`, consumed key by key; leftover keys are
/// unknown and rejected.
struct FileOverrides {
    entries: Vec<ConfigEntry>,
}

impl FileOverrides {
    fn load(path: Option<&Path>) -> Result<Self> {
        let entries = match path {
            Some(path) => parse_config(&fs::read_to_string(path)?)?,
            None => Vec::new(),
        };
        Ok(Self { entries })
    }

    /// Removes and parses `key`, if present.
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.entries.iter().position(|e| e.key == key) {
            Some(idx) => {
                let entry = self.entries.remove(idx);
                entry.parse().map(Some)
            }
            None => Ok(None),
        }
    }

    /// Errors on the first key no `take` call asked for.
    fn finish(self) -> Result<()> {
        match self.entries.first() {
            Some(entry) => Err(Error::Config {
                line: entry.line,
                message: format!("unknown key {}", entry.key),
            }),
            None => Ok(()),
        }
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| {
        Error::InvalidInput(format!(
            "missing required --{flag} (can also be set as `{flag}` in the config file)"
        ))
    })
}

fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    let items: Result<Vec<T>> = text
        .split(',')
        .map(|cell| {
            cell.trim().parse::<T>().map_err(|e| {
                Error::InvalidInput(format!("{what}: bad entry {:?} ({e})", cell.trim()))
            })
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(Error::InvalidInput(format!("{what} must be nonempty")));
    }
    Ok(items)
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(path) => Box::new(io::BufWriter::new(fs::File::create(path)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn master_seed(resolved: u64) -> Result<u64> {
    Ok(env_parsed::<u64>("NAVAR_MASTER_SEED")?.unwrap_or(resolved))
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PatternArg {
    Random,
    Band,
    Cluster,
}

impl PatternArg {
    fn kind(self) -> PatternKind {
        match self {
            PatternArg::Random => PatternKind::Random,
            PatternArg::Band => PatternKind::Band,
            PatternArg::Cluster => PatternKind::Cluster,
        }
    }

    fn name(self) -> &'static str {
        match self {
            PatternArg::Random => "random",
            PatternArg::Band => "band",
            PatternArg::Cluster => "cluster",
        }
    }
}

impl FromStr for PatternArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "random" => Ok(PatternArg::Random),
            "band" => Ok(PatternArg::Band),
            "cluster" => Ok(PatternArg::Cluster),
            other => Err(format!(
                "unknown pattern {other:?} (expected random, band, or cluster)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BaselineArg {
    Linear,
}

impl FromStr for BaselineArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(BaselineArg::Linear),
            other => Err(format!("unknown baseline {other:?} (expected linear)")),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Fourier,
    Linear,
}

impl FromStr for FamilyArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fourier" => Ok(FamilyArg::Fourier),
            "linear" => Ok(FamilyArg::Linear),
            other => Err(format!(
                "unknown family {other:?} (expected fourier or linear)"
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Args)]
struct SimulateArgs {
    /// Key = value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Network shape: random, band, or cluster [default: random].
    #[arg(long)]
    pattern: Option<PatternArg>,
    /// Process dimension [default: 20].
    #[arg(long)]
    p: Option<usize>,
    /// Nonzero transition components per row [default: 5].
    #[arg(long)]
    edges_per_row: Option<usize>,
    /// Observations to keep after burn-in (required).
    #[arg(long)]
    n: Option<usize>,
    /// Master seed (env NAVAR_MASTER_SEED overrides) [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Burn-in steps discarded before recording [default: 500].
    #[arg(long)]
    burn_in: Option<usize>,
    /// Output CSV path [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let mut file = FileOverrides::load(args.config.as_deref())?;
    let pattern = match args.pattern {
        Some(p) => p,
        None => file.take::<PatternArg>("pattern")?.unwrap_or(PatternArg::Random),
    };
    let p = args.p.or(file.take("p")?).unwrap_or(20);
    let edges = args
        .edges_per_row
        .or(file.take("edges-per-row")?)
        .unwrap_or(5);
    let n = require(args.n.or(file.take("n")?), "n")?;
    let seed = master_seed(args.seed.or(file.take("seed")?).unwrap_or(0))?;
    let burn_in = args
        .burn_in
        .or(file.take("burn-in")?)
        .unwrap_or(DEFAULT_BURN_IN);
    let out = args.out.or(file.take("out")?);
    file.finish()?;

    let spec = benchmark_spec(&PatternSpec {
        kind: pattern.kind(),
        p,
        per_row_nonzeros: edges,
        seed,
    })?;
    let margin = spec
        .lipschitz_matrix()?
        .stability_margin(DEFAULT_MARGIN_POWER);
    eprintln!("stability margin: {margin:.6} (contractive below 1)");
    if let Some(warning) = burn_in_shortfall(margin, burn_in) {
        eprintln!("warning: {warning}");
    }

    let panel = simulate(&spec, n, burn_in, seed)?;
    let mut writer = output_writer(out.as_deref())?;
    write_panel(&mut writer, &panel)?;
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// fit

/// Everything a fitted model needs to be inspected and applied later:
/// column names, the centering that was removed before fitting, the
/// cross-validation trace when one ran, training error, and the model itself.
#[derive(serde::Serialize, serde::Deserialize)]
struct FitReport {
    labels: Vec<String>,
    /// Column means subtracted before fitting; `predict` adds them back.
    center: Vec<f64>,
    /// Cross-validation table and winner (absent for fixed-penalty fits).
    cv: Option<CvSelection>,
    /// One-step mean squared error per entry on the training panel.
    train_mse: f64,
    fit: FitResult,
}

#[derive(Args)]
struct FitArgs {
    /// Key = value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input panel CSV (required).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Fit at this fixed penalty instead of cross-validating.
    #[arg(long, conflicts_with = "cv")]
    lambda: Option<f64>,
    /// Select penalty (and truncation level) by rolling-origin
    /// cross-validation; this is the default mode.
    #[arg(long)]
    cv: bool,
    /// Basis truncation level; fixes the level instead of cross-validating
    /// over 2,3,4,6.
    #[arg(long)]
    basis_size: Option<usize>,
    /// Basis support half-width as a multiple of the pooled standard
    /// deviation [default: 3].
    #[arg(long)]
    c0_mult: Option<f64>,
    /// Rolling-origin folds for --cv [default: 5].
    #[arg(long)]
    folds: Option<usize>,
    /// Penalty-path points for --cv [default: 30].
    #[arg(long)]
    grid_points: Option<usize>,
    /// Smallest path penalty as a fraction of the anchor [default: 0.01].
    #[arg(long)]
    grid_floor: Option<f64>,
    /// Fit the linear autoregressive baseline instead of the basis expansion.
    #[arg(long)]
    baseline: Option<BaselineArg>,
    /// Output JSON path [default: stdout].
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Also write the recovered network as a DOT digraph.
    #[arg(long)]
    out_dot: Option<PathBuf>,
}

fn run_fit(args: FitArgs) -> Result<()> {
    let mut file = FileOverrides::load(args.config.as_deref())?;
    let input = require(args.input.or(file.take("input")?), "input")?;
    let lambda = match args.lambda {
        Some(l) => Some(l),
        // A --cv flag overrides a fixed penalty from the file.
        None if args.cv => None,
        None => file.take("lambda")?,
    };
    let cv_requested = args.cv || file.take::<bool>("cv")?.unwrap_or(false);
    if lambda.is_some() && cv_requested && args.lambda.is_none() {
        return Err(Error::InvalidInput(
            "choose either a fixed `lambda` or `cv`, not both".to_string(),
        ));
    }
    let basis_size = args.basis_size.or(file.take("basis-size")?);
    let c0_mult = args
        .c0_mult
        .or(file.take("c0-mult")?)
        .unwrap_or(DEFAULT_C0_MULTIPLIER);
    let folds = args.folds.or(file.take("folds")?).unwrap_or(DEFAULT_CV_FOLDS);
    let grid_points = args
        .grid_points
        .or(file.take("grid-points")?)
        .unwrap_or(DEFAULT_CV_GRID_POINTS);
    let grid_floor = args
        .grid_floor
        .or(file.take("grid-floor")?)
        .unwrap_or(DEFAULT_CV_GRID_FLOOR);
    let baseline = match args.baseline {
        Some(b) => Some(b),
        None => file.take::<BaselineArg>("baseline")?,
    };
    let out_json = args.out_json.or(file.take("out-json")?);
    let out_dot = args.out_dot.or(file.take("out-dot")?);
    file.finish()?;

    let panel = read_panel(BufReader::new(fs::File::open(&input)?))?;
    let labels = panel
        .labels
        .clone()
        .expect("read_panel always sets labels");
    let (centered, center) = center_panel(&panel)?;

    let linear = baseline.is_some();
    if linear && basis_size.is_some() {
        return Err(Error::InvalidInput(
            "basis-size does not apply to the linear baseline".to_string(),
        ));
    }

    let (cv, result) = match lambda {
        Some(lambda) => {
            let result = if linear {
                fit_linear_var_baseline(&centered, lambda)?
            } else {
                let size = basis_size.unwrap_or(DEFAULT_BASIS_SIZE);
                fit_at(&centered, size, c0_mult, lambda)?
            };
            (None, result)
        }
        None => {
            let family = if linear {
                CvFamily::Linear
            } else {
                CvFamily::Fourier {
                    basis_sizes: match basis_size {
                        Some(size) => vec![size],
                        None => parse_list(DEFAULT_CV_BASIS_SIZES, "basis sizes")?,
                    },
                    c0_multiplier: c0_mult,
                }
            };
            let config = CvConfig {
                family,
                lambda: LambdaSelection::Anchored {
                    points: grid_points,
                    floor_ratio: grid_floor,
                },
                folds,
            };
            let selection = ts_cross_validate(&centered, &config)?;
            let result = if linear {
                fit_linear_var_baseline(&centered, selection.lambda)?
            } else {
                fit_at(&centered, selection.basis_size, c0_mult, selection.lambda)?
            };
            (Some(selection), result)
        }
    };

    let train_mse = one_step_mse(&result, &centered)?;
    eprintln!(
        "fitted lambda {:.6e}, {} features per covariate, {} edges, train mse {:.6e}",
        result.lambda,
        result.featurizer.block_size(),
        result.support.len(),
        train_mse
    );

    if let Some(path) = &out_dot {
        let mut writer = io::BufWriter::new(fs::File::create(path)?);
        write_influence_graph(&mut writer, &result, &labels)?;
        writer.flush()?;
    }

    let report = FitReport {
        labels,
        center,
        cv,
        train_mse,
        fit: result,
    };
    let mut writer = output_writer(out_json.as_deref())?;
    serde_json::to_writer_pretty(&mut writer, &report)?;
    writeln!(writer)?;
    writer.flush()?;
    Ok(())
}

/// Basis-expansion fit at a fixed penalty with certificate-tight tolerances.
fn fit_at(
    panel: &TimeSeriesPanel,
    basis_size: usize,
    c0_mult: f64,
    lambda: f64,
) -> Result<FitResult> {
    let half_width = c0_mult * panel.pooled_std();
    let featurizer = Featurizer::fourier(basis_size, half_width)?;
    let cache = DesignCache::build(panel, featurizer, DEFAULT_RIDGE_FLOOR)?;
    fit(&cache, &FitConfig::new(lambda))
}

// ---------------------------------------------------------------------------
// eval-table1

#[derive(Args)]
struct EvalArgs {
    /// Key = value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated patterns [default: random,band,cluster].
    #[arg(long)]
    patterns: Option<String>,
    /// Comma-separated process dimensions [default: 20,50,100].
    #[arg(long)]
    p_list: Option<String>,
    /// Comma-separated series lengths [default: 50,100,200,500].
    #[arg(long)]
    n_list: Option<String>,
    /// Nonzero transition components per row [default: 5].
    #[arg(long)]
    edges_per_row: Option<usize>,
    /// Replications per cell [default: 200].
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed (env NAVAR_MASTER_SEED overrides) [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Burn-in steps per replication [default: 500].
    #[arg(long)]
    burn_in: Option<usize>,
    /// Directory for per-replication checkpoint files; an interrupted run
    /// restarted with the same arguments resumes from them.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Output summary CSV path [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_eval_table1(args: EvalArgs) -> Result<()> {
    let mut file = FileOverrides::load(args.config.as_deref())?;
    let patterns: Vec<PatternArg> = parse_list(
        &args
            .patterns
            .or(file.take("patterns")?)
            .unwrap_or_else(|| "random,band,cluster".to_string()),
        "patterns",
    )?;
    let p_list: Vec<usize> = parse_list(
        &args
            .p_list
            .or(file.take("p-list")?)
            .unwrap_or_else(|| "20,50,100".to_string()),
        "p-list",
    )?;
    let n_list: Vec<usize> = parse_list(
        &args
            .n_list
            .or(file.take("n-list")?)
            .unwrap_or_else(|| "50,100,200,500".to_string()),
        "n-list",
    )?;
    let edges = args
        .edges_per_row
        .or(file.take("edges-per-row")?)
        .unwrap_or(5);
    let reps = args.reps.or(file.take("reps")?).unwrap_or(200);
    let seed = master_seed(args.seed.or(file.take("seed")?).unwrap_or(0))?;
    let burn_in = args
        .burn_in
        .or(file.take("burn-in")?)
        .unwrap_or(DEFAULT_BURN_IN);
    let checkpoint_dir = args.checkpoint_dir.or(file.take("checkpoint-dir")?);
    let out = args.out.or(file.take("out")?);
    file.finish()?;

    let headers = [
        "pattern",
        "p",
        "n",
        "reps",
        "mean_auroc",
        "se_auroc",
        "mean_aupr",
        "se_aupr",
    ];
    let mut rows = Vec::new();
    for &pattern in &patterns {
        for &p in &p_list {
            for &n in &n_list {
                let mut plan = ExperimentPlan::benchmark(
                    PatternSpec {
                        kind: pattern.kind(),
                        p,
                        per_row_nonzeros: edges,
                        seed,
                    },
                    n,
                    reps,
                    seed,
                );
                plan.burn_in = burn_in;
                let cell = evaluate_cell(&plan, pattern.name(), checkpoint_dir.as_deref())?;
                eprintln!(
                    "{} p={p} n={n}: auroc {:.3} aupr {:.3}",
                    pattern.name(),
                    cell.mean_auroc,
                    cell.mean_aupr
                );
                rows.push(vec![
                    pattern.name().to_string(),
                    p.to_string(),
                    n.to_string(),
                    reps.to_string(),
                    float_repr(cell.mean_auroc),
                    se_cell(cell.se_auroc, reps),
                    float_repr(cell.mean_aupr),
                    se_cell(cell.se_aupr, reps),
                ]);
            }
        }
    }

    let mut writer = output_writer(out.as_deref())?;
    write_table(&mut writer, &headers, &rows)?;
    writer.flush()?;
    Ok(())
}

/// Standard errors are undefined from a single replication.
fn se_cell(se: f64, reps: usize) -> String {
    if reps >= 2 {
        float_repr(se)
    } else {
        "NA".to_string()
    }
}

/// Runs one grid cell, through the checkpoint file when a directory is given.
fn evaluate_cell(
    plan: &ExperimentPlan,
    pattern_name: &str,
    checkpoint_dir: Option<&Path>,
) -> Result<Table1Cell> {
    let Some(dir) = checkpoint_dir else {
        return navar::eval::replicate_table1(plan);
    };
    fs::create_dir_all(dir)?;
    let path = dir.join(format!(
        "cell-{pattern_name}-p{}-n{}-s{}.csv",
        plan.pattern.p, plan.n, plan.seed
    ));

    let mut done = read_checkpoint(&path)?;
    done.retain(|row| row.rep < plan.reps);
    done.sort_by_key(|row| row.rep);
    done.dedup_by_key(|row| row.rep);

    // Rewrite the trusted rows so any torn tail from an earlier kill is
    // dropped before appending resumes.
    let mut file = fs::File::create(&path)?;
    file.write_all(format!("{CHECKPOINT_HEADER}\n").as_bytes())?;
    for row in &done {
        file.write_all(checkpoint_line(row).as_bytes())?;
    }

    let missing: Vec<usize> = (0..plan.reps)
        .filter(|rep| done.binary_search_by_key(rep, |row| row.rep).is_err())
        .collect();
    let batch_size = (rayon::current_num_threads() * 4).max(8);
    for batch in missing.chunks(batch_size) {
        let outcomes: Result<Vec<RepOutcome>> = batch
            .par_iter()
            .map(|&rep| table1_replicate(plan, rep))
            .collect();
        for row in outcomes? {
            // One write per replication so a kill loses at most the line in
            // flight; unterminated tails are discarded on resume.
            file.write_all(checkpoint_line(&row).as_bytes())?;
            done.push(row);
        }
        file.sync_data()?;
    }
    summarize_cell(plan, done)
}

fn checkpoint_line(row: &RepOutcome) -> String {
    format!(
        "{},{},{}\n",
        row.rep,
        float_repr(row.auroc),
        float_repr(row.aupr)
    )
}

/// Loads finished replications from a checkpoint file. Only newline-
/// terminated lines count; an unterminated tail is an interrupted append and
/// is silently recomputed.
fn read_checkpoint(path: &Path) -> Result<Vec<RepOutcome>> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let Some(terminated) = text.rfind('\n').map(|i| &text[..=i]) else {
        return Ok(Vec::new());
    };
    let mut lines = terminated.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CHECKPOINT_HEADER => {}
        Some((_, header)) => {
            return Err(Error::CsvParse {
                row: 1,
                column: 1,
                message: format!("unexpected checkpoint header {header:?}"),
            })
        }
        None => return Ok(Vec::new()),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let file_row = idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 3 {
            return Err(Error::CsvParse {
                row: file_row,
                column: cells.len().min(3) + 1,
                message: format!("expected 3 cells, found {}", cells.len()),
            });
        }
        let rep = cells[0].trim().parse::<usize>().map_err(|e| Error::CsvParse {
            row: file_row,
            column: 1,
            message: format!("bad replication index {:?} ({e})", cells[0]),
        })?;
        rows.push(RepOutcome {
            rep,
            auroc: navar::io::csv::parse_float(cells[1], file_row, 2)?,
            aupr: navar::io::csv::parse_float(cells[2], file_row, 3)?,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// cv

#[derive(Args)]
struct CvArgs {
    /// Key = value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input panel CSV (required).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Candidate family: fourier or linear [default: fourier].
    #[arg(long)]
    family: Option<FamilyArg>,
    /// Comma-separated truncation levels [default: 2,3,4,6].
    #[arg(long)]
    basis_sizes: Option<String>,
    /// Basis support half-width multiplier [default: 3].
    #[arg(long)]
    c0_mult: Option<f64>,
    /// Rolling-origin folds [default: 5].
    #[arg(long)]
    folds: Option<usize>,
    /// Penalty-path points [default: 30].
    #[arg(long)]
    grid_points: Option<usize>,
    /// Smallest path penalty as a fraction of the anchor [default: 0.01].
    #[arg(long)]
    grid_floor: Option<f64>,
    /// Output CSV path for the full candidate table [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_cv(args: CvArgs) -> Result<()> {
    let mut file = FileOverrides::load(args.config.as_deref())?;
    let input = require(args.input.or(file.take("input")?), "input")?;
    let family = match args.family {
        Some(f) => f,
        None => file
            .take::<FamilyArg>("family")?
            .unwrap_or(FamilyArg::Fourier),
    };
    let basis_sizes = args.basis_sizes.or(file.take("basis-sizes")?);
    let c0_mult = args
        .c0_mult
        .or(file.take("c0-mult")?)
        .unwrap_or(DEFAULT_C0_MULTIPLIER);
    let folds = args.folds.or(file.take("folds")?).unwrap_or(DEFAULT_CV_FOLDS);
    let grid_points = args
        .grid_points
        .or(file.take("grid-points")?)
        .unwrap_or(DEFAULT_CV_GRID_POINTS);
    let grid_floor = args
        .grid_floor
        .or(file.take("grid-floor")?)
        .unwrap_or(DEFAULT_CV_GRID_FLOOR);
    let out = args.out.or(file.take("out")?);
    file.finish()?;

    let family = match family {
        FamilyArg::Fourier => CvFamily::Fourier {
            basis_sizes: parse_list(
                basis_sizes.as_deref().unwrap_or(DEFAULT_CV_BASIS_SIZES),
                "basis sizes",
            )?,
            c0_multiplier: c0_mult,
        },
        FamilyArg::Linear => {
            if basis_sizes.is_some() {
                return Err(Error::InvalidInput(
                    "basis-sizes does not apply to the linear family".to_string(),
                ));
            }
            CvFamily::Linear
        }
    };

    let panel = read_panel(BufReader::new(fs::File::open(&input)?))?;
    let (centered, _) = center_panel(&panel)?;
    let config = CvConfig {
        family,
        lambda: LambdaSelection::Anchored {
            points: grid_points,
            floor_ratio: grid_floor,
        },
        folds,
    };
    let selection = ts_cross_validate(&centered, &config)?;
    eprintln!(
        "selected lambda {:.6e}, {} features per covariate, validation mse {:.6e}",
        selection.lambda, selection.basis_size, selection.mean_error
    );

    let headers = ["basis_size", "lambda", "mean_error"];
    let rows: Vec<Vec<String>> = selection
        .table
        .iter()
        .map(|row| {
            vec![
                row.basis_size.to_string(),
                float_repr(row.lambda),
                float_repr(row.mean_error),
            ]
        })
        .collect();
    let mut writer = output_writer(out.as_deref())?;
    write_table(&mut writer, &headers, &rows)?;
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// tails

/// Constants JSON emitted by the tails run.
#[derive(serde::Serialize)]
struct TailsReport {
    rho: f64,
    bound: f64,
    reps: usize,
    seed: u64,
    /// Pilot long-run standard deviation used to place the thresholds.
    long_run_sd: f64,
    envelope: EnvelopeFit,
    /// The theory's explicit (c1, c2) at this dependence level, for scale
    /// (absent at rho = 0 where the form is undefined).
    explicit_reference: Option<(f64, f64)>,
    estimates: Vec<TailEstimate>,
}

#[derive(Args)]
struct TailsArgs {
    /// Key = value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Autoregression coefficient of the scalar test chain, |rho| < 1
    /// [default: 0].
    #[arg(long)]
    rho: Option<f64>,
    /// Comma-separated sum lengths; the envelope fit needs at least three
    /// [default: 50,200,800].
    #[arg(long)]
    n_list: Option<String>,
    /// Monte-Carlo replications per length [default: 100000].
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed (env NAVAR_MASTER_SEED overrides) [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Clipping bound of the coordinate functional [default: 1].
    #[arg(long)]
    bound: Option<f64>,
    /// Threshold multipliers of the long-run sd times sqrt(n)
    /// [default: 0.5,1,1.5,2,2.5,3,3.5].
    #[arg(long)]
    z_mults: Option<String>,
    /// Per-length CSVs are written to {prefix}-n{n}.csv [default: tails].
    #[arg(long)]
    out_prefix: Option<String>,
    /// Output JSON path for the fitted constants [default: stdout].
    #[arg(long)]
    out_json: Option<PathBuf>,
}

fn run_tails(args: TailsArgs) -> Result<()> {
    let mut file = FileOverrides::load(args.config.as_deref())?;
    let rho = args.rho.or(file.take("rho")?).unwrap_or(0.0);
    let lengths: Vec<usize> = parse_list(
        &args
            .n_list
            .or(file.take("n-list")?)
            .unwrap_or_else(|| DEFAULT_TAIL_LENGTHS.to_string()),
        "n-list",
    )?;
    let reps = args
        .reps
        .or(file.take("reps")?)
        .unwrap_or(DEFAULT_TAIL_REPS);
    let seed = master_seed(args.seed.or(file.take("seed")?).unwrap_or(0))?;
    let bound = args.bound.or(file.take("bound")?).unwrap_or(1.0);
    let multipliers: Vec<f64> = parse_list(
        &args
            .z_mults
            .or(file.take("z-mults")?)
            .unwrap_or_else(|| DEFAULT_TAIL_MULTIPLIERS.to_string()),
        "z-mults",
    )?;
    let prefix = args
        .out_prefix
        .or(file.take("out-prefix")?)
        .unwrap_or_else(|| "tails".to_string());
    let out_json = args.out_json.or(file.take("out-json")?);
    file.finish()?;

    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidInput(format!(
            "the test chain needs |rho| < 1 for stationarity, got {rho}"
        )));
    }
    if multipliers.iter().any(|u| !(u.is_finite() && *u > 0.0))
        || multipliers.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidInput(
            "z-mults must be positive, finite, and strictly increasing".to_string(),
        ));
    }

    let spec = ar_chain(rho, seed);
    let functional = LipschitzFunctional::clipped_coordinate(1, 0, bound)?;
    let lr_sd = pilot_long_run_sd(&spec, &functional, PILOT_BATCH, PILOT_REPS, PILOT_SEED)?;
    eprintln!("pilot long-run sd: {lr_sd:.6}");

    let mut estimates = Vec::with_capacity(lengths.len());
    for &n in &lengths {
        let experiment = TailExperiment::new(
            spec.clone(),
            LipschitzFunctional::clipped_coordinate(1, 0, bound)?,
            n,
            scaled_thresholds(lr_sd, n, &multipliers),
            reps,
            seed.wrapping_add(n as u64),
        )?;
        let estimate = mc_tail(&experiment)?;
        eprintln!(
            "n={n}: largest threshold exceeded {} times in {reps} runs",
            estimate.counts.last().copied().unwrap_or(0)
        );
        estimates.push(estimate);
    }

    let envelope = fit_envelope(&estimates, &default_c1_grid(), &default_c2_grid())?;
    eprintln!(
        "fitted envelope: c1 {:.4}, c2 {:.4} (dominates all {} points)",
        envelope.c1, envelope.c2, envelope.points
    );

    for estimate in &estimates {
        let values = bernstein_envelope(
            estimate.tau,
            bound,
            estimate.n,
            &estimate.z_grid,
            envelope.c1,
            envelope.c2,
        );
        let headers = ["z", "empirical", "wilson_hi", "envelope"];
        let rows: Vec<Vec<String>> = estimate
            .z_grid
            .iter()
            .zip(estimate.frequencies.iter())
            .zip(estimate.wilson_upper.iter())
            .zip(values.iter())
            .map(|(((z, freq), hi), env)| {
                vec![
                    float_repr(*z),
                    float_repr(*freq),
                    float_repr(*hi),
                    float_repr(*env),
                ]
            })
            .collect();
        let path = PathBuf::from(format!("{prefix}-n{}.csv", estimate.n));
        let mut writer = io::BufWriter::new(fs::File::create(&path)?);
        write_table(&mut writer, &headers, &rows)?;
        writer.flush()?;
    }

    let report = TailsReport {
        rho,
        bound,
        reps,
        seed,
        long_run_sd: lr_sd,
        envelope,
        explicit_reference: if rho > 0.0 {
            Some(explicit_bernstein_constants(rho, bound * bound)?)
        } else {
            None
        },
        estimates,
    };
    let mut writer = output_writer(out_json.as_deref())?;
    serde_json::to_writer_pretty(&mut writer, &report)?;
    writeln!(writer)?;
    writer.flush()?;
    Ok(())
}

/// Scalar autoregressive chain with unit innovations: the canonical
/// dependent process for tail experiments.
fn ar_chain(rho: f64, seed: u64) -> AdditiveVarSpec {
    let mut spec = AdditiveVarSpec::new(1, 1.0, NoiseKind::Gaussian, seed);
    if rho != 0.0 {
        spec.entries
            .insert((0, 0), ComponentFunction::LinearCoef(rho));
    }
    spec
}

// ---------------------------------------------------------------------------
// predict

#[derive(Args)]
struct PredictArgs {
    /// Key = value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fitted model JSON written by `fit` (required).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Input panel CSV; one forecast is made from each row (required).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output CSV path [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_predict(args: PredictArgs) -> Result<()> {
    let mut file = FileOverrides::load(args.config.as_deref())?;
    let model = require(args.model.or(file.take("model")?), "model")?;
    let input = require(args.input.or(file.take("input")?), "input")?;
    let out = args.out.or(file.take("out")?);
    file.finish()?;

    let report: FitReport = serde_json::from_reader(BufReader::new(fs::File::open(&model)?))?;
    let panel = read_panel(BufReader::new(fs::File::open(&input)?))?;
    let p = report.center.len();
    if panel.n_vars() != p {
        return Err(Error::InvalidInput(format!(
            "panel has {} variables but the model was fitted on {p}",
            panel.n_vars()
        )));
    }
    if let Some(labels) = &panel.labels {
        if *labels != report.labels {
            return Err(Error::InvalidInput(format!(
                "panel columns {:?} do not match the model's {:?}",
                labels, report.labels
            )));
        }
    }

    let mut forecasts = ndarray::Array2::<f64>::zeros((panel.n_rows(), p));
    let mut state = vec![0.0; p];
    for (t, row) in panel.data.rows().into_iter().enumerate() {
        for (slot, (value, mean)) in state.iter_mut().zip(row.iter().zip(report.center.iter())) {
            *slot = value - mean;
        }
        let forecast = report.fit.predict_one_step(&state)?;
        for (j, value) in forecast.into_iter().enumerate() {
            forecasts[[t, j]] = value + report.center[j];
        }
    }

    let mut out_panel = TimeSeriesPanel::new(forecasts)?;
    out_panel.labels = Some(report.labels.clone());
    let mut writer = output_writer(out.as_deref())?;
    write_panel(&mut writer, &out_panel)?;
    writer.flush()?;
    Ok(())
}
