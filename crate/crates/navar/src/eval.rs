//! Model-selection experiments: activation paths, benchmark replication,
//! rolling-origin cross-validation, and the linear autoregressive baseline.
//!
//! The experiments here turn the estimator into the published benchmark
//! numbers: each simulated panel is scored by sweeping a descending penalty
//! path and recording, for every potential edge, the largest penalty at which
//! it enters the model. Ranking those activation scores against the true
//! network yields AUROC/AUPR; cross-validation picks the penalty and basis
//! size for single-panel fits.

use ndarray::{Array2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::design::{DesignCache, Featurizer, DEFAULT_RIDGE_FLOOR};
use crate::error::{Error, Result};
use crate::metrics::EdgeScores;
use crate::rng::{stream_rng, tag};
use crate::sim::{benchmark_spec, simulate, PatternSpec, TimeSeriesPanel};
use crate::solver::{fit, fit_with_init, lambda_grid, lambda_max, CoefficientTensor, FitConfig, FitResult};

/// Default truncation level for benchmark replication.
pub const DEFAULT_BASIS_SIZE: usize = 6;
/// Default support half-width as a multiple of the panel's pooled standard
/// deviation.
pub const DEFAULT_C0_MULTIPLIER: f64 = 3.0;
/// Default penalty-path resolution for activation scoring.
pub const DEFAULT_GRID_POINTS: usize = 50;
/// Default ratio between the smallest and largest path penalties.
pub const DEFAULT_GRID_FLOOR: f64 = 1e-3;
/// Default burn-in for benchmark panels.
pub const DEFAULT_BURN_IN: usize = 500;

/// Solver settings for path scoring: descent stops on an objective stall
/// rather than a tight optimality certificate, because activation scores
/// depend only on which blocks are active at each penalty level. Near the
/// bottom of the path the stacked design is rank-deficient (every block
/// shares the constant basis element) and certificate-tight descent would
/// burn its whole sweep budget polishing coefficients that cannot change the
/// active set.
fn path_config(lambda: f64) -> FitConfig {
    FitConfig {
        lambda,
        max_sweeps: 200,
        tol_objective: 1e-7,
        tol_kkt: f64::INFINITY,
        ..FitConfig::default()
    }
}

/// First-activation scores along a descending penalty path.
///
/// Entry (j, k) is the largest penalty in `grid` at which block (j, k) is
/// active, or zero when the block never activates; successive fits reuse the
/// previous solution as a warm start.
pub fn score_path(cache: &DesignCache, grid: &[f64]) -> Result<Array2<f64>> {
    score_path_with(cache, grid, &path_config(0.0))
}

/// [`score_path`] with explicit solver settings.
pub fn score_path_with(
    cache: &DesignCache,
    grid: &[f64],
    config: &FitConfig,
) -> Result<Array2<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("penalty grid is empty".to_string()));
    }
    if grid
        .windows(2)
        .any(|pair| !(pair[0] > pair[1]))
    {
        return Err(Error::InvalidInput(
            "penalty grid must be strictly descending".to_string(),
        ));
    }
    if grid.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
        return Err(Error::InvalidInput(
            "penalty grid entries must be positive and finite".to_string(),
        ));
    }

    let p = cache.num_covariates();
    let mut scores = Array2::zeros((p, p));
    let mut unscored = p * p;
    let mut warm: Option<CoefficientTensor> = None;
    for &lambda in grid {
        let step = FitConfig { lambda, ..*config };
        let result = fit_with_init(cache, &step, warm.as_ref())?;
        for &(j, k) in &result.support {
            if scores[[j, k]] == 0.0 {
                scores[[j, k]] = lambda;
                unscored -= 1;
            }
        }
        // Once every block has activated, later (smaller) penalties cannot
        // change any first-activation score.
        if unscored == 0 {
            break;
        }
        warm = Some(result.coefficients);
    }
    Ok(scores)
}

/// One cell of the benchmark replication grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentPlan {
    /// Network shape, dimension, and per-row edge count.
    pub pattern: PatternSpec,
    /// Series length per replication.
    pub n: usize,
    /// Number of independent replications.
    pub reps: usize,
    /// Burn-in discarded before each panel.
    pub burn_in: usize,
    /// Basis truncation level.
    pub basis_size: usize,
    /// Penalty-path resolution; the path is anchored at each panel's own
    /// smallest all-zero penalty, so the plan stores the grid shape rather
    /// than fixed values.
    pub grid_points: usize,
    /// Ratio of the smallest path penalty to the anchor.
    pub grid_floor_ratio: f64,
    /// Support half-width multiplier.
    pub c0_multiplier: f64,
    /// Master seed; every replication derives its own stream.
    pub seed: u64,
}

impl ExperimentPlan {
    /// Benchmark-default plan for one (pattern, p, n) cell.
    pub fn benchmark(pattern: PatternSpec, n: usize, reps: usize, seed: u64) -> Self {
        Self {
            pattern,
            n,
            reps,
            burn_in: DEFAULT_BURN_IN,
            basis_size: DEFAULT_BASIS_SIZE,
            grid_points: DEFAULT_GRID_POINTS,
            grid_floor_ratio: DEFAULT_GRID_FLOOR,
            c0_multiplier: DEFAULT_C0_MULTIPLIER,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 3 || self.reps == 0 || self.basis_size == 0 {
            return Err(Error::InvalidInput(format!(
                "plan needs n >= 3, reps >= 1, basis_size >= 1; got n={}, reps={}, basis_size={}",
                self.n, self.reps, self.basis_size
            )));
        }
        if self.grid_points < 2 || !(self.grid_floor_ratio > 0.0 && self.grid_floor_ratio < 1.0) {
            return Err(Error::InvalidInput(
                "plan needs at least 2 grid points and a floor ratio in (0, 1)".to_string(),
            ));
        }
        if !(self.c0_multiplier.is_finite() && self.c0_multiplier > 0.0) {
            return Err(Error::InvalidInput(
                "support multiplier must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// Metrics from a single replication.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub auroc: f64,
    pub aupr: f64,
}

/// Aggregated outcome of a replication cell.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Table1Cell {
    pub plan: ExperimentPlan,
    pub mean_auroc: f64,
    pub se_auroc: f64,
    pub mean_aupr: f64,
    pub se_aupr: f64,
    pub per_rep: Vec<RepOutcome>,
}

/// Runs one replication of a plan: simulate, score the path, rank.
pub fn table1_replicate(plan: &ExperimentPlan, rep: usize) -> Result<RepOutcome> {
    plan.validate()?;
    let rep_seed: u64 = stream_rng(plan.seed, &[tag::REPLICATION, rep as u64]).gen();
    let pattern = PatternSpec {
        seed: rep_seed,
        ..plan.pattern
    };
    let spec = benchmark_spec(&pattern)?;
    let panel = simulate(&spec, plan.n, plan.burn_in, rep_seed)?;
    let half_width = plan.c0_multiplier * panel.pooled_std();
    let featurizer = Featurizer::fourier(plan.basis_size, half_width)?;
    let cache = DesignCache::build(&panel, featurizer, DEFAULT_RIDGE_FLOOR)?;
    let top = lambda_max(&cache);
    let grid = lambda_grid(top, plan.grid_points, plan.grid_floor_ratio)?;
    let scores = score_path(&cache, &grid)?;
    let edges = EdgeScores::new(scores, spec.adjacency())?;
    Ok(RepOutcome {
        rep,
        auroc: crate::metrics::auroc(&edges)?,
        aupr: crate::metrics::aupr(&edges)?,
    })
}

/// Mean and standard error (population deviation over replications divided by
/// the square root of the count).
fn summarize(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    (mean, variance.sqrt() / count.sqrt())
}

/// Aggregates per-replication metrics into a cell summary.
pub fn summarize_cell(plan: &ExperimentPlan, mut per_rep: Vec<RepOutcome>) -> Result<Table1Cell> {
    if per_rep.len() != plan.reps {
        return Err(Error::InvalidInput(format!(
            "cell has {} replication rows but the plan calls for {}",
            per_rep.len(),
            plan.reps
        )));
    }
    per_rep.sort_by_key(|o| o.rep);
    let aurocs: Vec<f64> = per_rep.iter().map(|o| o.auroc).collect();
    let auprs: Vec<f64> = per_rep.iter().map(|o| o.aupr).collect();
    let (mean_auroc, se_auroc) = summarize(&aurocs);
    let (mean_aupr, se_aupr) = summarize(&auprs);
    Ok(Table1Cell {
        plan: plan.clone(),
        mean_auroc,
        se_auroc,
        mean_aupr,
        se_aupr,
        per_rep,
    })
}

/// Runs every replication of a plan (in parallel) and aggregates.
pub fn replicate_table1(plan: &ExperimentPlan) -> Result<Table1Cell> {
    plan.validate()?;
    let per_rep: Result<Vec<RepOutcome>> = (0..plan.reps)
        .into_par_iter()
        .map(|rep| table1_replicate(plan, rep))
        .collect();
    summarize_cell(plan, per_rep?)
}

/// Penalty-grid policy for cross-validation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum LambdaSelection {
    /// One explicit descending grid shared by every candidate model.
    Explicit(Vec<f64>),
    /// Per-model geometric grid anchored at that model's own smallest
    /// all-zero penalty on the full panel.
    Anchored { points: usize, floor_ratio: f64 },
}

/// Candidate model families for cross-validation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum CvFamily {
    /// Basis-expansion models over a grid of truncation levels.
    Fourier {
        basis_sizes: Vec<usize>,
        c0_multiplier: f64,
    },
    /// The linear autoregressive baseline (identity features).
    Linear,
}

/// Cross-validation settings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CvConfig {
    pub family: CvFamily,
    pub lambda: LambdaSelection,
    /// Number of rolling-origin folds (≥ 2).
    pub folds: usize,
}

impl CvConfig {
    /// Benchmark defaults: truncation levels {2, 3, 4, 6}, a 30-point
    /// anchored grid spanning two decades, five folds.
    pub fn nonlinear_default() -> Self {
        Self {
            family: CvFamily::Fourier {
                basis_sizes: vec![2, 3, 4, 6],
                c0_multiplier: DEFAULT_C0_MULTIPLIER,
            },
            lambda: LambdaSelection::Anchored {
                points: 30,
                floor_ratio: 1e-2,
            },
            folds: 5,
        }
    }

    /// Same shape for the linear baseline.
    pub fn linear_default() -> Self {
        Self {
            family: CvFamily::Linear,
            ..Self::nonlinear_default()
        }
    }
}

/// One evaluated candidate: a (model, penalty) pair and its validation error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CvRow {
    /// Truncation level (1 for the linear baseline).
    pub basis_size: usize,
    pub lambda: f64,
    /// Mean one-step squared error per entry across folds.
    pub mean_error: f64,
}

/// Cross-validation outcome.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CvSelection {
    pub lambda: f64,
    pub basis_size: usize,
    pub mean_error: f64,
    /// Every candidate evaluated, in evaluation order.
    pub table: Vec<CvRow>,
}

/// Featurizers to evaluate under a family, paired with their reported
/// truncation level.
fn candidate_featurizers(
    family: &CvFamily,
    panel: &TimeSeriesPanel,
) -> Result<Vec<(usize, Featurizer)>> {
    match family {
        CvFamily::Fourier {
            basis_sizes,
            c0_multiplier,
        } => {
            if basis_sizes.is_empty() {
                return Err(Error::InvalidInput(
                    "cross-validation needs at least one truncation level".to_string(),
                ));
            }
            let half_width = c0_multiplier * panel.pooled_std();
            if !(half_width.is_finite() && half_width > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "panel spread gives unusable support half-width {half_width}"
                )));
            }
            basis_sizes
                .iter()
                .map(|&size| Ok((size, Featurizer::fourier(size, half_width)?)))
                .collect()
        }
        CvFamily::Linear => Ok(vec![(1, Featurizer::Identity)]),
    }
}

/// Rolling-origin cross-validation over penalty levels and model families.
///
/// The n - 1 lagged pairs are split so the validation blocks tile the most
/// recent half of the series in `folds` equal segments; each fold trains on
/// everything strictly before its block and scores one-step forecasts on the
/// block. The winner minimizes mean validation error, with ties broken
/// toward the larger penalty and then the smaller truncation level.
pub fn ts_cross_validate(panel: &TimeSeriesPanel, config: &CvConfig) -> Result<CvSelection> {
    if config.folds < 2 {
        return Err(Error::InvalidInput(format!(
            "rolling-origin cross-validation needs at least 2 folds, got {}",
            config.folds
        )));
    }
    let pairs = panel.n_rows() - 1;
    let segment = pairs / (2 * config.folds);
    if segment == 0 || pairs < 2 * config.folds {
        return Err(Error::InsufficientData(format!(
            "{} lagged pairs cannot host {} validation folds",
            pairs, config.folds
        )));
    }
    let first_block_start = pairs - config.folds * segment;
    if first_block_start < 1 {
        return Err(Error::InsufficientData(
            "no training data remains before the first validation block".to_string(),
        ));
    }

    let mut table = Vec::new();
    for (basis_size, featurizer) in candidate_featurizers(&config.family, panel)? {
        let grid = match &config.lambda {
            LambdaSelection::Explicit(grid) => {
                if grid.is_empty() || grid.windows(2).any(|w| !(w[0] > w[1])) {
                    return Err(Error::InvalidInput(
                        "explicit cross-validation grid must be nonempty and descending"
                            .to_string(),
                    ));
                }
                grid.clone()
            }
            LambdaSelection::Anchored {
                points,
                floor_ratio,
            } => {
                let full = DesignCache::build(panel, featurizer.clone(), DEFAULT_RIDGE_FLOOR)?;
                lambda_grid(lambda_max(&full), *points, *floor_ratio)?
            }
        };

        let mut errors = vec![0.0; grid.len()];
        for fold in 0..config.folds {
            let block_start = pairs - (config.folds - fold) * segment;
            let block_end = block_start + segment;
            // Training pairs 0..block_start come from panel rows
            // 0..=block_start.
            let train = TimeSeriesPanel::new(
                panel
                    .data
                    .slice(ndarray::s![..block_start + 1, ..])
                    .to_owned(),
            )?;
            let cache = DesignCache::build(&train, featurizer.clone(), DEFAULT_RIDGE_FLOOR)?;
            let mut warm: Option<CoefficientTensor> = None;
            for (slot, &lambda) in errors.iter_mut().zip(grid.iter()) {
                let result =
                    fit_with_init(&cache, &FitConfig::new(lambda), warm.as_ref())?;
                let mut block_error = 0.0;
                for t in block_start..block_end {
                    let state = panel.data.row(t);
                    let forecast = result.predict_one_step(
                        state.as_slice().expect("panel rows are contiguous"),
                    )?;
                    for (j, &predicted) in forecast.iter().enumerate() {
                        let actual = panel.data[[t + 1, j]];
                        block_error += (actual - predicted) * (actual - predicted);
                    }
                }
                *slot += block_error / (segment * panel.n_vars()) as f64;
                warm = Some(result.coefficients);
            }
        }

        for (&lambda, &total) in grid.iter().zip(errors.iter()) {
            table.push(CvRow {
                basis_size,
                lambda,
                mean_error: total / config.folds as f64,
            });
        }
    }

    let best = table
        .iter()
        .copied()
        .min_by(|a, b| {
            a.mean_error
                .partial_cmp(&b.mean_error)
                .expect("validation errors are finite")
                .then(
                    b.lambda
                        .partial_cmp(&a.lambda)
                        .expect("grid entries are finite"),
                )
                .then(a.basis_size.cmp(&b.basis_size))
        })
        .expect("table has at least one candidate");

    Ok(CvSelection {
        lambda: best.lambda,
        basis_size: best.basis_size,
        mean_error: best.mean_error,
        table,
    })
}

/// Entrywise-lasso linear vector autoregression: the same solver with a
/// single identity feature per covariate.
pub fn fit_linear_var_baseline(panel: &TimeSeriesPanel, lambda: f64) -> Result<FitResult> {
    let cache = DesignCache::build(panel, Featurizer::Identity, DEFAULT_RIDGE_FLOOR)?;
    fit(&cache, &FitConfig::new(lambda))
}

/// Mean squared one-step forecast error per entry over a panel's
/// transitions.
pub fn one_step_mse(result: &FitResult, panel: &TimeSeriesPanel) -> Result<f64> {
    let rows = panel.n_rows();
    let p = panel.n_vars();
    let mut total = 0.0;
    for t in 0..rows - 1 {
        let state = panel.data.row(t);
        let forecast =
            result.predict_one_step(state.as_slice().expect("panel rows are contiguous"))?;
        for (j, &predicted) in forecast.iter().enumerate() {
            let actual = panel.data[[t + 1, j]];
            total += (actual - predicted) * (actual - predicted);
        }
    }
    Ok(total / ((rows - 1) * p) as f64)
}

/// Column-centers a panel by its own column means; returns the centered
/// panel and the means.
///
/// Centering the training window (and applying its means everywhere) is the
/// conventional preprocessing for single-panel fits, where the constant basis
/// element would otherwise spend a degree of freedom per covariate on the
/// mean level.
pub fn center_panel(panel: &TimeSeriesPanel) -> Result<(TimeSeriesPanel, Vec<f64>)> {
    let means: Vec<f64> = panel
        .data
        .mean_axis(Axis(0))
        .expect("panel has rows")
        .to_vec();
    let mut centered = panel.data.clone();
    for mut row in centered.rows_mut() {
        for (value, mean) in row.iter_mut().zip(means.iter()) {
            *value -= mean;
        }
    }
    Ok((
        TimeSeriesPanel {
            data: centered,
            labels: panel.labels.clone(),
        },
        means,
    ))
}
