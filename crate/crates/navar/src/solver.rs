//! Functional group-lasso estimation by block coordinate descent.
//!
//! The sample problem minimized here is, per response `j`,
//!
//! ```text
//! (1/m) sum_t (y_{t,j} - sum_k psi_k(x_{t,k})' b_{j,k})^2
//!     + lambda * sum_k sqrt(b_{j,k}' Sigma_k b_{j,k})
//! ```
//!
//! with `Sigma_k` the empirical Gram of covariate `k`'s feature block. The
//! penalty is an empirical L2 function norm, so each block subproblem has a
//! closed-form solution after reparameterizing by `Sigma_k^{1/2}`: correlate,
//! whiten, group-soft-threshold, unwhiten. The objective is separable across
//! responses, and the solver exploits that by fitting the `p` response
//! problems independently (and in parallel).

use ndarray::linalg::general_mat_vec_mul;
use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::design::{DesignCache, Featurizer, DEFAULT_RIDGE_FLOOR};
use crate::error::{Error, Result};

/// Coefficient blocks for every (response, covariate) pair.
///
/// Stored as a `[p, p, L]` tensor addressed `[response, covariate, element]`;
/// the memory order (response outer, covariate middle, element inner) matches
/// the stacked coefficient vector the design matrix multiplies.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoefficientTensor {
    values: Array3<f64>,
}

impl CoefficientTensor {
    /// All-zero tensor for `p` variables with `block_size` features each.
    pub fn zeros(p: usize, block_size: usize) -> Self {
        Self {
            values: Array3::zeros((p, p, block_size)),
        }
    }

    /// Wraps an explicit tensor.
    pub fn from_values(values: Array3<f64>) -> Result<Self> {
        let (j, k, _) = values.dim();
        if j != k {
            return Err(Error::InvalidInput(format!(
                "coefficient tensor must be square in its first two axes, got {j}x{k}"
            )));
        }
        Ok(Self { values })
    }

    /// Number of variables `p`.
    pub fn num_vars(&self) -> usize {
        self.values.dim().0
    }

    /// Features per block.
    pub fn block_size(&self) -> usize {
        self.values.dim().2
    }

    /// Coefficient block for (response `j`, covariate `k`).
    pub fn block(&self, j: usize, k: usize) -> ArrayView1<'_, f64> {
        self.values.slice(ndarray::s![j, k, ..])
    }

    /// All blocks of response `j` as a `[p, L]` matrix.
    pub fn response(&self, j: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(Axis(0), j)
    }

    /// Raw tensor view.
    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    /// Whether block (j, k) is exactly zero.
    pub fn is_block_zero(&self, j: usize, k: usize) -> bool {
        self.block(j, k).iter().all(|&v| v == 0.0)
    }

    /// Euclidean distance to another tensor of the same shape.
    pub fn distance(&self, other: &Self) -> f64 {
        let mut sum = 0.0;
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            sum += (a - b) * (a - b);
        }
        sum.sqrt()
    }

    fn set_response(&mut self, j: usize, blocks: &Array2<f64>) {
        self.values.index_axis_mut(Axis(0), j).assign(blocks);
    }
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FitConfig {
    /// Group-lasso penalty level.
    pub lambda: f64,
    /// Hard cap on coordinate-descent sweeps per response.
    pub max_sweeps: usize,
    /// Relative objective-decrease threshold that triggers a convergence
    /// check.
    pub tol_objective: f64,
    /// Maximum allowed optimality-certificate violation. May be infinite, in
    /// which case an objective stall alone ends the descent (useful along
    /// scoring paths, where only the active set matters); the final
    /// certificate is still computed and reported.
    pub tol_kkt: f64,
    /// Eigenvalue floor for degenerate Gram matrices (must match the floor the
    /// design cache was built with).
    pub ridge_floor: f64,
    /// Whether to concentrate sweeps on the active blocks between full
    /// rescans.
    pub active_set: bool,
}

impl FitConfig {
    /// Default configuration at penalty level `lambda`.
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "penalty level must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidInput(
                "max_sweeps must be positive".to_string(),
            ));
        }
        for (name, value) in [
            ("tol_objective", self.tol_objective),
            ("ridge_floor", self.ridge_floor),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.tol_kkt > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tol_kkt must be positive, got {}",
                self.tol_kkt
            )));
        }
        Ok(())
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            max_sweeps: 1000,
            tol_objective: 1e-8,
            tol_kkt: 1e-6,
            ridge_floor: DEFAULT_RIDGE_FLOOR,
            active_set: true,
        }
    }
}

/// A fitted group-lasso model together with its diagnostics.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FitResult {
    /// Estimated coefficient blocks.
    pub coefficients: CoefficientTensor,
    /// Feature map the coefficients apply to.
    pub featurizer: Featurizer,
    /// Penalty level the fit was run at.
    pub lambda: f64,
    /// Total objective after each sweep (summed across responses, first entry
    /// is the objective at the initial point); nonincreasing.
    pub objective_trace: Vec<f64>,
    /// Largest sweep count used by any response.
    pub sweeps_used: usize,
    /// Whether every response converged within its sweep budget and the final
    /// certificate is within tolerance.
    pub converged: bool,
    /// Final optimality-certificate violation (see [`kkt_check`]).
    pub kkt_residual: f64,
    /// Entry (j, k) is the empirical function norm of the fitted component
    /// `sqrt(b_{j,k}' Sigma_k b_{j,k})`.
    pub group_norms: Array2<f64>,
    /// Blocks with nonzero coefficients, in (response, covariate) order.
    pub support: Vec<(usize, usize)>,
    /// Covariates whose Gram needed the ridge floor.
    pub degenerate_grams: Vec<usize>,
}

impl FitResult {
    /// Directed influence structure: entry (j, k) is 1 when covariate `k`
    /// drives response `j`.
    pub fn adjacency(&self) -> Array2<u8> {
        let p = self.coefficients.num_vars();
        let mut adj = Array2::zeros((p, p));
        for &(j, k) in &self.support {
            adj[[j, k]] = 1;
        }
        adj
    }

    /// Evaluates the fitted component function for (response `j`, covariate
    /// `k`) on a grid.
    pub fn estimate_function(&self, j: usize, k: usize, grid: &[f64]) -> Result<Vec<f64>> {
        let p = self.coefficients.num_vars();
        if j >= p || k >= p {
            return Err(Error::InvalidInput(format!(
                "block ({j}, {k}) out of range for {p} variables"
            )));
        }
        let block = self.coefficients.block(j, k);
        let size = self.featurizer.block_size();
        let mut features = vec![0.0; size];
        Ok(grid
            .iter()
            .map(|&x| {
                self.featurizer.fill(x, &mut features);
                features
                    .iter()
                    .zip(block.iter())
                    .map(|(&f, &b)| f * b)
                    .sum()
            })
            .collect())
    }

    /// One-step conditional-mean forecast from state `x`.
    pub fn predict_one_step(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.coefficients.num_vars();
        if x.len() != p {
            return Err(Error::InvalidInput(format!(
                "state has {} entries but the model was fitted on {p} variables",
                x.len()
            )));
        }
        let features = self.featurizer.featurize_state(x);
        let flat_len = p * self.coefficients.block_size();
        let mut forecast = vec![0.0; p];
        for (j, slot) in forecast.iter_mut().enumerate() {
            let response = self.coefficients.response(j);
            let flat = response
                .into_shape_with_order(flat_len)
                .expect("response blocks are contiguous");
            *slot = flat.dot(&features);
        }
        Ok(forecast)
    }
}

/// Value of the group-lasso objective at `b`.
pub fn objective(b: &CoefficientTensor, cache: &DesignCache, lambda: f64) -> f64 {
    let p = cache.num_covariates();
    let m = cache.num_samples();
    let flat_len = p * cache.block_size();
    let mut total = 0.0;
    for j in 0..p {
        let flat = b
            .response(j)
            .into_shape_with_order(flat_len)
            .expect("response blocks are contiguous");
        let fitted = cache.design().dot(&flat);
        let mut loss = 0.0;
        for (t, &f) in fitted.iter().enumerate() {
            let r = cache.targets()[[t, j]] - f;
            loss += r * r;
        }
        total += loss / m as f64;
        for k in 0..p {
            let block = b.block(j, k);
            total += lambda
                * cache.gram_norm(
                    k,
                    block
                        .as_slice()
                        .expect("inner axis of a standard-layout tensor is contiguous"),
                );
        }
    }
    total
}

/// Exact minimizer of one block subproblem.
///
/// `partial_residual` must be the response with every other covariate's
/// current contribution removed: `y_j - sum_{k' != k} Psi_{k'} b_{j,k'}`.
/// The solution whitens the correlation by `Sigma_k^{-1/2}`, shrinks its
/// length by `lambda / 2`, and maps back; the block is exactly zero whenever
/// the whitened correlation is short enough (ties included).
pub fn block_update(
    cache: &DesignCache,
    k: usize,
    partial_residual: ArrayView1<'_, f64>,
    lambda: f64,
) -> Array1<f64> {
    let m = cache.num_samples();
    let psi = cache.block(k);
    let mut c = psi.t().dot(&partial_residual);
    c.mapv_inplace(|v| v / m as f64);
    let d = cache.gram_isqrt(k).dot(&c);
    let d_norm = d.dot(&d).sqrt();
    if 2.0 * d_norm <= lambda {
        return Array1::zeros(cache.block_size());
    }
    let scale = 1.0 - lambda / (2.0 * d_norm);
    cache.gram_isqrt(k).dot(&(&d * scale))
}

/// Smallest penalty level at which the fitted model is exactly zero.
pub fn lambda_max(cache: &DesignCache) -> f64 {
    let p = cache.num_covariates();
    let m = cache.num_samples();
    let mut best: f64 = 0.0;
    for j in 0..p {
        let y = cache.targets().index_axis_move(Axis(1), j);
        for k in 0..p {
            let mut c = cache.block(k).t().dot(&y);
            c.mapv_inplace(|v| v / m as f64);
            let d = cache.gram_isqrt(k).dot(&c);
            best = best.max(2.0 * d.dot(&d).sqrt());
        }
    }
    best
}

/// Geometric penalty grid from `lambda_max` down to `floor_ratio *
/// lambda_max`, inclusive on both ends.
pub fn lambda_grid(lambda_max: f64, points: usize, floor_ratio: f64) -> Result<Vec<f64>> {
    if !(lambda_max.is_finite() && lambda_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "grid anchor must be positive and finite, got {lambda_max}"
        )));
    }
    if points < 2 || !(floor_ratio > 0.0 && floor_ratio < 1.0) {
        return Err(Error::InvalidInput(format!(
            "need at least 2 grid points and a floor ratio in (0, 1), got {points} and {floor_ratio}"
        )));
    }
    let log_top = lambda_max.ln();
    let log_bot = (lambda_max * floor_ratio).ln();
    Ok((0..points)
        .map(|i| {
            let frac = i as f64 / (points - 1) as f64;
            (log_top + frac * (log_bot - log_top)).exp()
        })
        .collect())
}

/// Optimality-certificate violation of `b` at penalty level `lambda`.
///
/// For a zero block, dual feasibility requires the whitened gradient to have
/// length at most `lambda`; for an active block, stationarity requires the
/// gradient plus the penalty subgradient to vanish. Both violations are
/// reported relative to `lambda`, and the maximum over all blocks is
/// returned; a value of zero certifies optimality.
pub fn kkt_check(b: &CoefficientTensor, cache: &DesignCache, lambda: f64) -> f64 {
    let p = cache.num_covariates();
    let flat_len = p * cache.block_size();
    (0..p)
        .into_par_iter()
        .map(|j| {
            let flat = b
                .response(j)
                .into_shape_with_order(flat_len)
                .expect("response blocks are contiguous");
            let fitted = cache.design().dot(&flat);
            let y = cache.targets().index_axis_move(Axis(1), j);
            let residual = &y - &fitted;
            response_kkt(cache, b.response(j), residual.view(), lambda)
        })
        .reduce(|| 0.0, f64::max)
}

/// Certificate violation for a single response, given its maintained
/// residual.
fn response_kkt(
    cache: &DesignCache,
    blocks: ArrayView2<'_, f64>,
    residual: ArrayView1<'_, f64>,
    lambda: f64,
) -> f64 {
    let p = cache.num_covariates();
    let m = cache.num_samples();
    let mut worst: f64 = 0.0;
    for k in 0..p {
        let psi = cache.block(k);
        let mut gradient = psi.t().dot(&residual);
        gradient.mapv_inplace(|v| -2.0 * v / m as f64);
        if lambda == 0.0 {
            // No penalty: plain stationarity for every block.
            worst = worst.max(gradient.dot(&gradient).sqrt());
            continue;
        }
        let block = blocks.row(k);
        let is_zero = block.iter().all(|&v| v == 0.0);
        if is_zero {
            let whitened = cache.gram_isqrt(k).dot(&gradient);
            let slack = whitened.dot(&whitened).sqrt() / lambda - 1.0;
            worst = worst.max(slack.max(0.0));
        } else {
            let norm = cache.gram_norm(
                k,
                block
                    .as_slice()
                    .expect("inner axis of a standard-layout tensor is contiguous"),
            );
            let direction = cache.gram(k).dot(&block);
            let mut violation = 0.0;
            for (g, d) in gradient.iter().zip(direction.iter()) {
                let v = g + lambda * d / norm;
                violation += v * v;
            }
            worst = worst.max(violation.sqrt() / lambda);
        }
    }
    worst
}

/// Outcome of one response's coordinate descent.
struct ResponseFit {
    blocks: Array2<f64>,
    trace: Vec<f64>,
    sweeps: usize,
    converged: bool,
}

/// Solves the group lasso for response `j` by cyclic block coordinate
/// descent with exact block minimization.
fn solve_response(
    cache: &DesignCache,
    j: usize,
    config: &FitConfig,
    init: Option<ArrayView2<'_, f64>>,
    order: &[usize],
) -> ResponseFit {
    let p = cache.num_covariates();
    let m = cache.num_samples();
    let block_size = cache.block_size();
    let lambda = config.lambda;

    let mut blocks = match init {
        Some(view) => view.to_owned(),
        None => Array2::zeros((p, block_size)),
    };
    let y = cache.targets().index_axis(Axis(1), j).to_owned();
    let mut residual = y.clone();
    if init.is_some() {
        let flat = blocks
            .view()
            .into_shape_with_order(p * block_size)
            .expect("blocks are contiguous");
        general_mat_vec_mul(-1.0, &cache.design(), &flat, 1.0, &mut residual);
    }

    let current_objective = |residual: &Array1<f64>, blocks: &Array2<f64>| -> f64 {
        let mut value = residual.dot(residual) / m as f64;
        for k in 0..p {
            value += lambda
                * cache.gram_norm(k, blocks.row(k).as_slice().expect("row is contiguous"));
        }
        value
    };

    let mut correlation = Array1::zeros(block_size);
    let mut whitened = Array1::zeros(block_size);
    let mut updated = Array1::zeros(block_size);
    let mut delta = Array1::zeros(block_size);
    let mut sweep = |blocks: &mut Array2<f64>, residual: &mut Array1<f64>, subset: &[usize]| {
        for &k in subset {
            let psi = cache.block(k);
            // Correlation of the partial residual with this block's
            // features: (1/m) Psi_k' r + Sigma_k b_k.
            general_mat_vec_mul(
                1.0 / m as f64,
                &psi.t(),
                &residual.view(),
                0.0,
                &mut correlation,
            );
            general_mat_vec_mul(
                1.0,
                &cache.gram(k),
                &blocks.row(k),
                1.0,
                &mut correlation,
            );
            general_mat_vec_mul(
                1.0,
                &cache.gram_isqrt(k),
                &correlation.view(),
                0.0,
                &mut whitened,
            );
            let d_norm = whitened.dot(&whitened).sqrt();
            if 2.0 * d_norm <= lambda {
                updated.fill(0.0);
            } else {
                whitened *= 1.0 - lambda / (2.0 * d_norm);
                general_mat_vec_mul(
                    1.0,
                    &cache.gram_isqrt(k),
                    &whitened.view(),
                    0.0,
                    &mut updated,
                );
            }
            delta.assign(&blocks.row(k));
            delta -= &updated;
            if delta.iter().any(|&v| v != 0.0) {
                general_mat_vec_mul(1.0, &psi, &delta.view(), 1.0, residual);
                blocks.row_mut(k).assign(&updated);
            }
        }
    };

    let all: Vec<usize> = order.to_vec();
    let mut trace = vec![current_objective(&residual, &blocks)];
    let mut sweeps = 0usize;
    let mut full_sweeps = 0usize;
    let mut converged = false;

    while sweeps < config.max_sweeps {
        let run_active = config.active_set && full_sweeps >= 2;
        if run_active {
            loop {
                let active: Vec<usize> = all
                    .iter()
                    .copied()
                    .filter(|&k| blocks.row(k).iter().any(|&v| v != 0.0))
                    .collect();
                if active.is_empty() || sweeps >= config.max_sweeps {
                    break;
                }
                sweep(&mut blocks, &mut residual, &active);
                sweeps += 1;
                let value = current_objective(&residual, &blocks);
                let previous = *trace.last().expect("trace is seeded");
                trace.push(value);
                if previous - value <= config.tol_objective * previous.abs().max(1.0) {
                    break;
                }
            }
            if sweeps >= config.max_sweeps {
                break;
            }
        }

        sweep(&mut blocks, &mut residual, &all);
        sweeps += 1;
        full_sweeps += 1;
        let value = current_objective(&residual, &blocks);
        let previous = *trace.last().expect("trace is seeded");
        trace.push(value);

        let stalled = previous - value <= config.tol_objective * previous.abs().max(1.0);
        if stalled && full_sweeps >= 2 {
            if config.tol_kkt.is_infinite()
                || response_kkt(cache, blocks.view(), residual.view(), lambda) <= config.tol_kkt
            {
                converged = true;
                break;
            }
        }
    }

    ResponseFit {
        blocks,
        trace,
        sweeps,
        converged,
    }
}

/// Fits the group lasso on `cache` at the configured penalty level.
pub fn fit(cache: &DesignCache, config: &FitConfig) -> Result<FitResult> {
    fit_with_init(cache, config, None)
}

/// Fits with an optional warm start.
pub fn fit_with_init(
    cache: &DesignCache,
    config: &FitConfig,
    init: Option<&CoefficientTensor>,
) -> Result<FitResult> {
    let order: Vec<usize> = (0..cache.num_covariates()).collect();
    fit_with_order(cache, config, init, &order)
}

/// Fits with an explicit block sweep order.
///
/// Internal seam used to assert that the recovered support does not depend on
/// the order blocks are visited in (in the certificate-tight regime).
pub(crate) fn fit_with_order(
    cache: &DesignCache,
    config: &FitConfig,
    init: Option<&CoefficientTensor>,
    order: &[usize],
) -> Result<FitResult> {
    config.validate()?;
    let p = cache.num_covariates();
    let block_size = cache.block_size();
    if let Some(tensor) = init {
        if tensor.num_vars() != p || tensor.block_size() != block_size {
            return Err(Error::InvalidInput(format!(
                "warm start has shape ({}, {}) but the cache needs ({p}, {block_size})",
                tensor.num_vars(),
                tensor.block_size(),
            )));
        }
    }
    {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..p).collect::<Vec<_>>() {
            return Err(Error::InvalidInput(
                "sweep order must be a permutation of the covariates".to_string(),
            ));
        }
    }

    let fits: Vec<ResponseFit> = (0..p)
        .into_par_iter()
        .map(|j| solve_response(cache, j, config, init.map(|t| t.response(j)), order))
        .collect();

    let mut coefficients = CoefficientTensor::zeros(p, block_size);
    let mut sweeps_used = 0;
    let mut all_converged = true;
    let longest = fits.iter().map(|f| f.trace.len()).max().unwrap_or(1);
    let mut objective_trace = vec![0.0; longest];
    for (j, response) in fits.iter().enumerate() {
        coefficients.set_response(j, &response.blocks);
        sweeps_used = sweeps_used.max(response.sweeps);
        all_converged &= response.converged;
        for (slot, idx) in objective_trace.iter_mut().zip(0..longest) {
            // Responses that stopped early hold their final objective.
            let value = response
                .trace
                .get(idx)
                .copied()
                .unwrap_or_else(|| *response.trace.last().expect("trace is seeded"));
            *slot += value;
        }
    }

    let mut group_norms = Array2::zeros((p, p));
    let mut support = Vec::new();
    for j in 0..p {
        for k in 0..p {
            let block = coefficients.block(j, k);
            let norm = cache.gram_norm(
                k,
                block
                    .as_slice()
                    .expect("inner axis of a standard-layout tensor is contiguous"),
            );
            group_norms[[j, k]] = norm;
            if !coefficients.is_block_zero(j, k) {
                support.push((j, k));
            }
        }
    }

    let kkt_residual = kkt_check(&coefficients, cache, config.lambda);
    Ok(FitResult {
        coefficients,
        featurizer: cache.featurizer().clone(),
        lambda: config.lambda,
        objective_trace,
        sweeps_used,
        converged: all_converged && kkt_residual <= config.tol_kkt,
        kkt_residual,
        group_norms,
        support,
        degenerate_grams: cache.degenerate_covariates().to_vec(),
    })
}

/// Fits a descending penalty path with warm starts.
///
/// `lambdas` should be sorted from largest to smallest; each fit starts from
/// the previous solution, which is what makes dense activation paths cheap.
pub fn fit_path(cache: &DesignCache, lambdas: &[f64], config: &FitConfig) -> Result<Vec<FitResult>> {
    let mut results = Vec::with_capacity(lambdas.len());
    let mut warm: Option<CoefficientTensor> = None;
    for &lambda in lambdas {
        let step = FitConfig { lambda, ..*config };
        let result = fit_with_init(cache, &step, warm.as_ref())?;
        warm = Some(result.coefficients.clone());
        results.push(result);
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigh;
    use crate::sim::TimeSeriesPanel;
    use rand::Rng;

    fn random_panel(p: usize, n: usize, seed: u64) -> TimeSeriesPanel {
        let mut rng = crate::rng::stream_rng(seed, &[1]);
        let data = Array2::from_shape_fn((n, p), |_| rng.gen_range(-1.5..1.5));
        TimeSeriesPanel::new(data).unwrap()
    }

    fn fourier_cache(panel: &TimeSeriesPanel, size: usize, half_width: f64) -> DesignCache {
        DesignCache::build(
            panel,
            Featurizer::fourier(size, half_width).unwrap(),
            DEFAULT_RIDGE_FLOOR,
        )
        .unwrap()
    }

    #[test]
    fn objective_at_zero_is_the_mean_squared_target_norm() {
        let panel = random_panel(3, 40, 2);
        let cache = fourier_cache(&panel, 4, 2.0);
        let b = CoefficientTensor::zeros(3, 4);
        let m = cache.num_samples() as f64;
        let expected: f64 = cache.targets().iter().map(|&v| v * v).sum::<f64>() / m;
        assert!((objective(&b, &cache, 0.7) - expected).abs() < 1e-12);
    }

    #[test]
    fn scalar_objective_matches_the_hand_formula() {
        // One variable, one constant feature of value c: the objective is
        // (1/m) sum (y_t - c b)^2 + lambda |c| |b|.
        let panel = random_panel(1, 30, 3);
        let cache = fourier_cache(&panel, 1, 1.3);
        let c = 1.0 / (2.0_f64 * 1.3).sqrt();
        let b_value = 0.42;
        let mut values = Array3::zeros((1, 1, 1));
        values[[0, 0, 0]] = b_value;
        let b = CoefficientTensor::from_values(values).unwrap();
        let lambda = 0.9;
        let m = cache.num_samples() as f64;
        let mut expected = 0.0;
        for t in 0..cache.num_samples() {
            let r = cache.targets()[[t, 0]] - c * b_value;
            expected += r * r;
        }
        expected = expected / m + lambda * c * b_value.abs();
        assert!((objective(&b, &cache, lambda) - expected).abs() < 1e-12);
    }

    #[test]
    fn block_update_returns_zero_on_zero_residual() {
        let panel = random_panel(2, 50, 4);
        let cache = fourier_cache(&panel, 3, 1.0);
        let zero = Array1::zeros(cache.num_samples());
        let update = block_update(&cache, 1, zero.view(), 0.4);
        assert!(update.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unpenalized_block_update_solves_the_block_least_squares() {
        let panel = random_panel(1, 80, 5);
        let cache = fourier_cache(&panel, 3, 1.5);
        let y = cache.targets().index_axis(Axis(1), 0).to_owned();
        let update = block_update(&cache, 0, y.view(), 0.0);
        // Direct solve of Sigma beta = (1/m) Psi' y via the eigensystem.
        let mut c = cache.block(0).t().dot(&y);
        c.mapv_inplace(|v| v / cache.num_samples() as f64);
        let (w, v) = sym_eigh(&cache.gram(0).to_owned());
        let mut beta = Array1::<f64>::zeros(3);
        for i in 0..3 {
            let vi = v.index_axis(Axis(1), i);
            let coef = vi.dot(&c) / w[i];
            beta = beta + &vi.to_owned() * coef;
        }
        for l in 0..3 {
            assert!(
                (update[l] - beta[l]).abs() < 1e-10,
                "element {l}: {} vs {}",
                update[l],
                beta[l]
            );
        }
    }

    #[test]
    fn penalty_at_or_above_lambda_max_kills_every_block() {
        let panel = random_panel(4, 60, 6);
        let cache = fourier_cache(&panel, 5, 2.0);
        let top = lambda_max(&cache);
        let result = fit(&cache, &FitConfig::new(top * 1.0001)).unwrap();
        assert!(result.support.is_empty());
        assert!(result.kkt_residual <= 1e-10);
        let result_at = fit(&cache, &FitConfig::new(top)).unwrap();
        assert!(result_at.support.is_empty(), "ties resolve to zero");
    }

    #[test]
    fn penalty_just_below_lambda_max_activates_something() {
        let panel = random_panel(4, 60, 6);
        let cache = fourier_cache(&panel, 5, 2.0);
        let top = lambda_max(&cache);
        let result = fit(&cache, &FitConfig::new(top * 0.99)).unwrap();
        assert!(!result.support.is_empty());
    }

    #[test]
    fn unpenalized_fit_matches_full_least_squares() {
        // With Fourier blocks the constant element repeats across covariates,
        // so coefficients are only identified up to that null space; fitted
        // values are unique and must match the pseudoinverse solution.
        let panel = random_panel(2, 100, 7);
        let cache = fourier_cache(&panel, 2, 1.8);
        let config = FitConfig {
            tol_objective: 1e-13,
            ..FitConfig::new(0.0)
        };
        let result = fit(&cache, &config).unwrap();
        assert!(result.kkt_residual <= 1e-6, "normal equations unsolved");
        let design = cache.design();
        let m = cache.num_samples() as f64;
        let mut gram = design.t().dot(&design);
        gram.mapv_inplace(|v| v / m);
        let (w, v) = sym_eigh(&gram);
        let cutoff = 1e-10 * w[w.len() - 1];
        for j in 0..2 {
            let y = cache.targets().index_axis_move(Axis(1), j);
            let mut rhs = design.t().dot(&y);
            rhs.mapv_inplace(|x| x / m);
            let mut beta = Array1::<f64>::zeros(4);
            for i in 0..4 {
                if w[i] <= cutoff {
                    continue;
                }
                let vi = v.index_axis(Axis(1), i);
                let coef = vi.dot(&rhs) / w[i];
                beta = beta + &vi.to_owned() * coef;
            }
            let flat = result
                .coefficients
                .response(j)
                .into_shape_with_order(4)
                .unwrap()
                .to_owned();
            let fitted = design.dot(&flat);
            let reference = design.dot(&beta);
            for t in 0..cache.num_samples() {
                assert!(
                    (fitted[t] - reference[t]).abs() < 1e-6,
                    "response {j} fitted value {t}: {} vs {}",
                    fitted[t],
                    reference[t]
                );
            }
        }
    }

    #[test]
    fn objective_trace_is_nonincreasing() {
        let panel = random_panel(5, 120, 8);
        let cache = fourier_cache(&panel, 4, 2.0);
        let lambda = lambda_max(&cache) * 0.2;
        let result = fit(&cache, &FitConfig::new(lambda)).unwrap();
        for pair in result.objective_trace.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-12,
                "objective increased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
        assert!(result.converged);
    }

    #[test]
    fn reported_support_contains_exactly_the_nonzero_blocks() {
        let panel = random_panel(4, 90, 9);
        let cache = fourier_cache(&panel, 3, 1.7);
        let lambda = lambda_max(&cache) * 0.35;
        let result = fit(&cache, &FitConfig::new(lambda)).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let in_support = result.support.contains(&(j, k));
                let is_zero = result.coefficients.is_block_zero(j, k);
                assert_eq!(in_support, !is_zero);
                assert_eq!(result.adjacency()[[j, k]] == 1, in_support);
                if is_zero {
                    assert_eq!(result.group_norms[[j, k]], 0.0);
                } else {
                    assert!(result.group_norms[[j, k]] > 0.0);
                }
            }
        }
        // At a mid-path penalty, both kinds of block should be present.
        assert!(!result.support.is_empty());
        assert!(result.support.len() < 16);
    }

    #[test]
    fn converged_fit_carries_a_tight_certificate() {
        let panel = random_panel(3, 150, 10);
        let cache = fourier_cache(&panel, 4, 2.1);
        let lambda = lambda_max(&cache) * 0.15;
        let result = fit(&cache, &FitConfig::new(lambda)).unwrap();
        assert!(result.converged);
        assert!(result.kkt_residual <= 1e-6);
    }

    #[test]
    fn perturbing_an_active_block_breaks_the_certificate() {
        let panel = random_panel(3, 150, 10);
        let cache = fourier_cache(&panel, 4, 2.1);
        let lambda = lambda_max(&cache) * 0.15;
        let result = fit(&cache, &FitConfig::new(lambda)).unwrap();
        let &(j, k) = result.support.first().expect("mid-path fit has support");
        let mut values = result.coefficients.values().clone();
        values[[j, k, 0]] += 0.1;
        let perturbed = CoefficientTensor::from_values(values).unwrap();
        assert!(kkt_check(&perturbed, &cache, lambda) > 1e-3);
    }

    #[test]
    fn support_is_invariant_to_the_sweep_order() {
        let panel = random_panel(5, 200, 11);
        let cache = fourier_cache(&panel, 3, 1.9);
        let lambda = lambda_max(&cache) * 0.3;
        let config = FitConfig {
            tol_objective: 1e-13,
            tol_kkt: 1e-9,
            ..FitConfig::new(lambda)
        };
        let forward = fit_with_order(&cache, &config, None, &[0, 1, 2, 3, 4]).unwrap();
        let backward = fit_with_order(&cache, &config, None, &[4, 3, 2, 1, 0]).unwrap();
        assert!(forward.kkt_residual <= 1e-8 && backward.kkt_residual <= 1e-8);
        assert_eq!(forward.support, backward.support);
        assert!(forward.coefficients.distance(&backward.coefficients) < 1e-6);
    }

    #[test]
    fn rotating_the_feature_blocks_preserves_objective_and_support() {
        let panel = random_panel(3, 80, 12);
        let block_size = 3;
        let cache = fourier_cache(&panel, block_size, 1.6);
        let lambda = lambda_max(&cache) * 0.25;
        let result = fit(&cache, &FitConfig::new(lambda)).unwrap();

        // Orthogonal matrices from the eigenvectors of random symmetric
        // matrices, one per covariate.
        let mut rng = crate::rng::stream_rng(77, &[3]);
        let rotations: Vec<Array2<f64>> = (0..3)
            .map(|_| {
                let raw = Array2::from_shape_fn((block_size, block_size), |_| {
                    rng.gen_range(-1.0..1.0)
                });
                let sym = &raw + &raw.t();
                sym_eigh(&sym).1
            })
            .collect();

        // Rotated features phi_k = Q_k psi_k mean design blocks Psi_k Q_k'.
        let m = cache.num_samples();
        let mut rotated_design = Array2::zeros((m, 3 * block_size));
        for k in 0..3 {
            let rotated = cache.block(k).dot(&rotations[k]);
            rotated_design
                .slice_mut(ndarray::s![.., k * block_size..(k + 1) * block_size])
                .assign(&rotated);
        }
        let rotated_cache = DesignCache::from_parts(
            rotated_design,
            cache.targets().to_owned(),
            Featurizer::fourier(block_size, 1.6).unwrap(),
            DEFAULT_RIDGE_FLOOR,
        )
        .unwrap();

        // Coefficients transform contravariantly: b' = Q' b.
        let mut rotated_values = Array3::zeros((3, 3, block_size));
        for j in 0..3 {
            for k in 0..3 {
                let transformed = rotations[k].t().dot(&result.coefficients.block(j, k));
                rotated_values
                    .slice_mut(ndarray::s![j, k, ..])
                    .assign(&transformed);
            }
        }
        let rotated_tensor = CoefficientTensor::from_values(rotated_values).unwrap();

        let original = objective(&result.coefficients, &cache, lambda);
        let rotated = objective(&rotated_tensor, &rotated_cache, lambda);
        assert!(
            (original - rotated).abs() < 1e-9 * original.abs().max(1.0),
            "objective changed under rotation: {original} vs {rotated}"
        );

        let refit = fit(&rotated_cache, &FitConfig::new(lambda)).unwrap();
        assert_eq!(refit.support, result.support);
        for j in 0..3 {
            for k in 0..3 {
                assert!(
                    (refit.group_norms[[j, k]] - result.group_norms[[j, k]]).abs() < 1e-6,
                    "group norm changed under rotation at ({j}, {k})"
                );
            }
        }
    }

    #[test]
    fn warm_started_path_matches_cold_fits() {
        let panel = random_panel(3, 100, 13);
        let cache = fourier_cache(&panel, 3, 1.5);
        let top = lambda_max(&cache);
        let lambdas = lambda_grid(top, 5, 1e-2).unwrap();
        let config = FitConfig::default();
        let path = fit_path(&cache, &lambdas, &config).unwrap();
        for (i, &lambda) in lambdas.iter().enumerate() {
            let cold = fit(&cache, &FitConfig::new(lambda)).unwrap();
            let warm_obj = objective(&path[i].coefficients, &cache, lambda);
            let cold_obj = objective(&cold.coefficients, &cache, lambda);
            assert!(
                (warm_obj - cold_obj).abs() <= 1e-7 * cold_obj.abs().max(1.0),
                "path point {i}: warm {warm_obj} vs cold {cold_obj}"
            );
        }
    }

    #[test]
    fn estimated_zero_block_is_the_zero_function() {
        let panel = random_panel(3, 70, 14);
        let cache = fourier_cache(&panel, 4, 1.4);
        let result = fit(&cache, &FitConfig::new(lambda_max(&cache) * 1.1)).unwrap();
        let values = result
            .estimate_function(0, 1, &[-2.0, -0.5, 0.0, 0.5, 2.0])
            .unwrap();
        assert!(values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn estimated_function_clamps_outside_the_support() {
        let panel = random_panel(2, 60, 15);
        let cache = fourier_cache(&panel, 4, 1.4);
        let result = fit(&cache, &FitConfig::new(lambda_max(&cache) * 0.3)).unwrap();
        let inside = result.estimate_function(0, 0, &[1.4]).unwrap()[0];
        let outside = result.estimate_function(0, 0, &[57.0]).unwrap()[0];
        assert_eq!(inside, outside);
    }

    #[test]
    fn forecast_of_the_zero_model_is_zero() {
        let panel = random_panel(3, 50, 16);
        let cache = fourier_cache(&panel, 3, 1.2);
        let result = fit(&cache, &FitConfig::new(lambda_max(&cache) * 2.0)).unwrap();
        let forecast = result.predict_one_step(&[0.4, -0.3, 0.9]).unwrap();
        assert_eq!(forecast, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn forecast_matches_the_manual_feature_product() {
        let panel = random_panel(2, 90, 17);
        let cache = fourier_cache(&panel, 3, 1.7);
        let result = fit(&cache, &FitConfig::new(lambda_max(&cache) * 0.1)).unwrap();
        let state = [0.25, -0.85];
        let forecast = result.predict_one_step(&state).unwrap();
        let features = cache.featurizer().featurize_state(&state);
        for j in 0..2 {
            let flat = result
                .coefficients
                .response(j)
                .into_shape_with_order(6)
                .unwrap();
            assert!((forecast[j] - flat.dot(&features)).abs() < 1e-14);
        }
    }

    #[test]
    fn fit_result_round_trips_through_json() {
        let panel = random_panel(2, 60, 18);
        let cache = fourier_cache(&panel, 3, 1.1);
        let result = fit(&cache, &FitConfig::new(lambda_max(&cache) * 0.4)).unwrap();
        let text = serde_json::to_string(&result).unwrap();
        let back: FitResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back.coefficients, result.coefficients);
        assert_eq!(back.support, result.support);
        assert_eq!(back.lambda, result.lambda);
        assert_eq!(back.featurizer, result.featurizer);
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let panel = random_panel(2, 30, 19);
        let cache = fourier_cache(&panel, 2, 1.0);
        let bad_lambda = FitConfig::new(-1.0);
        assert!(matches!(
            fit(&cache, &bad_lambda),
            Err(Error::InvalidInput(_))
        ));
        let bad_tol = FitConfig {
            tol_kkt: 0.0,
            ..FitConfig::new(0.1)
        };
        assert!(matches!(fit(&cache, &bad_tol), Err(Error::InvalidInput(_))));
    }
}
