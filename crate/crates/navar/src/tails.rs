//! Monte-Carlo verification of Bernstein-type tail bounds for Lipschitz
//! functionals of the stationary process.
//!
//! For a componentwise-Lipschitz functional `g` with budget `tau` and sup
//! bound `M`, sums `S_n = sum_t (g(X_t) - E g)` of the dependent process obey
//!
//! ```text
//! P(|S_n| >= z) <= 2 exp{ -z^2 / (c1 tau^2 n + c2 tau M z) }
//! ```
//!
//! for constants `c1`, `c2` depending only on the process. This module
//! estimates the left side by Monte Carlo (with Wilson upper confidence
//! limits, so the inequality is tested against the noisy estimate's safe
//! side), evaluates the right side, and searches constant grids for the
//! tightest dominating envelope.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, tag};
use crate::sim::{simulate, AdditiveVarSpec};

/// Steps discarded before tail sums start accumulating, enough to forget the
/// zero initial state under any margin the simulator accepts.
pub const TAIL_WARM_UP: usize = 200;

/// Two-sided 95% normal quantile used for Wilson upper confidence limits.
pub const WILSON_Z95: f64 = 1.959963984540054;

/// Random two-point pairs drawn when verifying a declared Lipschitz vector.
pub const LIPSCHITZ_CHECK_PAIRS: usize = 10_000;

/// A scalar functional of the process state with a declared componentwise
/// Lipschitz vector.
///
/// The declaration promises `|g(x) - g(y)| <= sum_j G_j |x_j - y_j|`; the
/// budget `tau = ||G||_1` and the optional sup bound `M >= sup |g|` are the
/// two scales entering the tail envelopes.
pub struct LipschitzFunctional {
    map: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    coefficients: Vec<f64>,
    tau: f64,
    sup_bound: Option<f64>,
}

impl std::fmt::Debug for LipschitzFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LipschitzFunctional")
            .field("coefficients", &self.coefficients)
            .field("tau", &self.tau)
            .field("sup_bound", &self.sup_bound)
            .finish_non_exhaustive()
    }
}

impl LipschitzFunctional {
    /// One coordinate clipped to `[-bound, bound]`: Lipschitz coefficient 1
    /// at `index`, sup bound `bound`.
    pub fn clipped_coordinate(dimension: usize, index: usize, bound: f64) -> Result<Self> {
        if index >= dimension {
            return Err(Error::InvalidInput(format!(
                "coordinate {index} out of range for dimension {dimension}"
            )));
        }
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::InvalidInput(format!(
                "clip bound must be positive and finite, got {bound}"
            )));
        }
        let mut coefficients = vec![0.0; dimension];
        coefficients[index] = 1.0;
        Ok(Self {
            map: Box::new(move |x: &[f64]| x[index].clamp(-bound, bound)),
            coefficients,
            tau: 1.0,
            sup_bound: Some(bound),
        })
    }

    /// Weighted sum of clipped coordinates: `g(x) = sum_j w_j clip(x_j)`,
    /// Lipschitz vector `|w|`, sup bound `bound * sum |w_j|`.
    pub fn weighted_clipped_sum(weights: Vec<f64>, bound: f64) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput(
                "weights must be nonempty and finite".to_string(),
            ));
        }
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::InvalidInput(format!(
                "clip bound must be positive and finite, got {bound}"
            )));
        }
        let coefficients: Vec<f64> = weights.iter().map(|w| w.abs()).collect();
        let tau: f64 = coefficients.iter().sum();
        if tau == 0.0 {
            return Err(Error::InvalidInput(
                "at least one weight must be nonzero".to_string(),
            ));
        }
        let sup = bound * tau;
        let w = weights;
        Ok(Self {
            map: Box::new(move |x: &[f64]| {
                w.iter()
                    .zip(x)
                    .map(|(wj, xj)| wj * xj.clamp(-bound, bound))
                    .sum()
            }),
            coefficients,
            tau,
            sup_bound: Some(sup),
        })
    }

    /// A caller-supplied functional with a declared Lipschitz vector. The
    /// declaration is checked by random two-point sampling before any tail
    /// experiment runs.
    pub fn custom(
        map: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
        coefficients: Vec<f64>,
        sup_bound: Option<f64>,
    ) -> Result<Self> {
        if coefficients.is_empty()
            || coefficients.iter().any(|c| !(c.is_finite() && *c >= 0.0))
        {
            return Err(Error::InvalidInput(
                "Lipschitz coefficients must be nonnegative and finite".to_string(),
            ));
        }
        if let Some(m) = sup_bound {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "sup bound must be nonnegative and finite, got {m}"
                )));
            }
        }
        let tau: f64 = coefficients.iter().sum();
        Ok(Self {
            map,
            coefficients,
            tau,
            sup_bound,
        })
    }

    pub fn dimension(&self) -> usize {
        self.coefficients.len()
    }

    /// Declared componentwise Lipschitz coefficients.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `||G||_1`, the total Lipschitz budget.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Declared bound on `sup |g|`, when available.
    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }

    /// Evaluates the functional on one state.
    ///
    /// # Panics
    /// Panics when the state dimension does not match.
    pub fn eval(&self, state: &[f64]) -> f64 {
        assert_eq!(
            state.len(),
            self.dimension(),
            "state dimension does not match the functional"
        );
        (self.map)(state)
    }

    /// Checks the declared Lipschitz vector on random two-point pairs:
    /// `|g(x) - g(y)| <= sum_j G_j |x_j - y_j|` must hold (up to rounding
    /// slack) on every pair, or the declaration is rejected.
    pub fn verify_declaration(&self, pairs: usize, seed: u64) -> Result<()> {
        let p = self.dimension();
        let mut rng = stream_rng(seed, &[tag::FUNCTIONAL]);
        let spread = Normal::new(0.0, 2.0).expect("valid normal parameters");
        let mut x: Vec<f64> = vec![0.0; p];
        let mut y: Vec<f64> = vec![0.0; p];
        for _ in 0..pairs {
            for j in 0..p {
                x[j] = spread.sample(&mut rng);
                y[j] = spread.sample(&mut rng);
            }
            let allowance: f64 = self
                .coefficients
                .iter()
                .zip(x.iter().zip(y.iter()))
                .map(|(g, (a, b))| g * (a - b).abs())
                .sum();
            let gap = ((self.map)(&x) - (self.map)(&y)).abs();
            if gap > allowance + 1e-9 * (1.0 + allowance) {
                return Err(Error::InvalidInput(format!(
                    "declared Lipschitz vector violated: |g(x) - g(y)| = {gap:.6} \
                     exceeds the allowed {allowance:.6}"
                )));
            }
            if let Some(m) = self.sup_bound {
                let value = (self.map)(&x).abs();
                if value > m + 1e-9 * (1.0 + m) {
                    return Err(Error::InvalidInput(format!(
                        "declared sup bound violated: |g(x)| = {value:.6} exceeds {m:.6}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One Monte-Carlo tail experiment: a process, a functional, a sum length,
/// and the thresholds to report.
#[derive(Debug)]
pub struct TailExperiment {
    pub spec: AdditiveVarSpec,
    pub functional: LipschitzFunctional,
    /// Number of summands per replication.
    pub n: usize,
    /// Increasing nonnegative thresholds for `|S_n|`.
    pub z_grid: Vec<f64>,
    /// Replications; at least 10^4 so the smallest meaningful tail
    /// frequency (10 / reps) stays below the probabilities of interest.
    pub reps: usize,
    pub seed: u64,
}

impl TailExperiment {
    /// Validates the configuration and the functional's declaration.
    pub fn new(
        spec: AdditiveVarSpec,
        functional: LipschitzFunctional,
        n: usize,
        z_grid: Vec<f64>,
        reps: usize,
        seed: u64,
    ) -> Result<Self> {
        let experiment = Self {
            spec,
            functional,
            n,
            z_grid,
            reps,
            seed,
        };
        experiment.validate()?;
        Ok(experiment)
    }

    /// Revalidates all invariants (fields are public and may have been
    /// edited).
    pub fn validate(&self) -> Result<()> {
        if self.functional.dimension() != self.spec.p {
            return Err(Error::InvalidInput(format!(
                "functional dimension {} does not match the process dimension {}",
                self.functional.dimension(),
                self.spec.p
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidInput(
                "tail sums need at least one summand".to_string(),
            ));
        }
        if self.reps < 10_000 {
            return Err(Error::InvalidInput(format!(
                "tail estimation needs at least 10^4 replications, got {}",
                self.reps
            )));
        }
        if self.z_grid.is_empty()
            || self.z_grid.iter().any(|z| !(z.is_finite() && *z >= 0.0))
            || self.z_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidInput(
                "z grid must be nonempty, nonnegative, finite, and strictly increasing"
                    .to_string(),
            ));
        }
        self.functional
            .verify_declaration(LIPSCHITZ_CHECK_PAIRS, self.seed)
    }
}

/// Empirical tail frequencies with Wilson 95% upper confidence limits.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TailEstimate {
    pub n: usize,
    pub reps: usize,
    pub tau: f64,
    pub sup_bound: Option<f64>,
    /// Mean of the functional estimated from the independent pilot run; sums
    /// are centered at this value.
    pub pilot_mean: f64,
    /// Length of the pilot run.
    pub pilot_len: usize,
    pub z_grid: Vec<f64>,
    /// Replications with `|S_n| >= z`, per threshold.
    pub counts: Vec<u64>,
    /// `counts / reps`.
    pub frequencies: Vec<f64>,
    /// Wilson 95% upper confidence limit per threshold.
    pub wilson_upper: Vec<f64>,
}

/// Wilson score upper confidence limit for a binomial proportion.
pub fn wilson_upper(successes: u64, trials: u64, quantile: f64) -> f64 {
    assert!(trials > 0, "Wilson limit needs at least one trial");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = quantile * quantile;
    let denominator = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let radius = quantile * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (center + radius) / denominator
}

/// Centered sums `S_n = sum_t (g(X_t) - center)` over independent stationary
/// replications, one per derived RNG stream.
pub fn functional_sums(
    spec: &AdditiveVarSpec,
    functional: &LipschitzFunctional,
    n: usize,
    reps: usize,
    center: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed: u64 = stream_rng(seed, &[tag::TAIL, rep as u64]).gen();
            let panel = simulate(spec, n, TAIL_WARM_UP, rep_seed)?;
            let mut sum = 0.0;
            for row in panel.data.rows() {
                sum += functional.eval(row.as_slice().expect("panel rows are contiguous"));
            }
            Ok(sum - n as f64 * center)
        })
        .collect()
}

/// Pilot estimate of the long-run standard deviation of the summand process:
/// the per-replication standard deviation of length-`batch` sums over
/// independent stationary runs, divided by `sqrt(batch)`.
///
/// Tail thresholds are meaningful on the `sqrt(n)` scale (the central limit
/// scale of `S_n`), so callers use this to place `z` grids at fixed multiples
/// of `lr_sd * sqrt(n)` across different sum lengths.
pub fn pilot_long_run_sd(
    spec: &AdditiveVarSpec,
    functional: &LipschitzFunctional,
    batch: usize,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if batch == 0 || reps < 2 {
        return Err(Error::InvalidInput(format!(
            "long-run pilot needs a positive batch and at least 2 replications, \
             got batch={batch}, reps={reps}"
        )));
    }
    // The variance is translation invariant, so the sums need no centering.
    let sums = functional_sums(spec, functional, batch, reps, 0.0, seed)?;
    let mean = sums.iter().sum::<f64>() / sums.len() as f64;
    let variance = sums.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / sums.len() as f64;
    Ok((variance / batch as f64).sqrt())
}

/// Thresholds `u * lr_sd * sqrt(n)` for each multiplier `u`.
pub fn scaled_thresholds(lr_sd: f64, n: usize, multipliers: &[f64]) -> Vec<f64> {
    multipliers
        .iter()
        .map(|u| u * lr_sd * (n as f64).sqrt())
        .collect()
}

/// Runs a tail experiment: pilot-centers the functional, simulates the
/// replications, and reports empirical tail frequencies with Wilson upper
/// limits.
///
/// The mean `E g(X_t)` is generally unknown for nonlinear specifications, so
/// it is estimated from one independent run 100x the experiment length
/// (capped at 10^6 states); the pilot error is far below any useful
/// threshold spacing.
pub fn mc_tail(experiment: &TailExperiment) -> Result<TailEstimate> {
    experiment.validate()?;
    let TailExperiment {
        spec,
        functional,
        n,
        z_grid,
        reps,
        seed,
    } = experiment;

    let pilot_len = (100 * n).min(1_000_000);
    let pilot_seed: u64 = stream_rng(*seed, &[tag::PILOT]).gen();
    let pilot = simulate(spec, pilot_len, TAIL_WARM_UP, pilot_seed)?;
    let pilot_mean = pilot
        .data
        .rows()
        .into_iter()
        .map(|row| functional.eval(row.as_slice().expect("panel rows are contiguous")))
        .sum::<f64>()
        / pilot_len as f64;

    let sums = functional_sums(spec, functional, *n, *reps, pilot_mean, *seed)?;

    let counts: Vec<u64> = z_grid
        .iter()
        .map(|&z| sums.iter().filter(|s| s.abs() >= z).count() as u64)
        .collect();
    let frequencies: Vec<f64> = counts.iter().map(|&k| k as f64 / *reps as f64).collect();
    let upper: Vec<f64> = counts
        .iter()
        .map(|&k| wilson_upper(k, *reps as u64, WILSON_Z95))
        .collect();

    Ok(TailEstimate {
        n: *n,
        reps: *reps,
        tau: functional.tau(),
        sup_bound: functional.sup_bound(),
        pilot_mean,
        pilot_len,
        z_grid: z_grid.clone(),
        counts,
        frequencies,
        wilson_upper: upper,
    })
}

/// Bernstein-type envelope for bounded functionals:
/// `2 exp{-z^2 / (c1 tau^2 n + c2 tau M z)}` pointwise over `z_grid`.
pub fn bernstein_envelope(
    tau: f64,
    sup_bound: f64,
    n: usize,
    z_grid: &[f64],
    c1: f64,
    c2: f64,
) -> Vec<f64> {
    z_grid
        .iter()
        .map(|&z| {
            let denominator = c1 * tau * tau * n as f64 + c2 * tau * sup_bound * z;
            2.0 * (-(z * z) / denominator).exp()
        })
        .collect()
}

/// Sub-exponential variant for unbounded functionals (no sup bound):
/// `2 exp{-z^2 / (c3 tau^2 n + c4 tau z)}`.
pub fn subexponential_envelope(
    tau: f64,
    n: usize,
    z_grid: &[f64],
    c3: f64,
    c4: f64,
) -> Vec<f64> {
    z_grid
        .iter()
        .map(|&z| {
            let denominator = c3 * tau * tau * n as f64 + c4 * tau * z;
            2.0 * (-(z * z) / denominator).exp()
        })
        .collect()
}

/// The theory's explicit envelope constants for a process with geometric
/// dependence coefficient `rho` and second moment scale `mu2`:
/// `c1 = 32 e^2 (-rho^2 log rho)^{-2} mu2^2`, `c2 = 8 e (-rho^2 log rho)^{-1}`.
///
/// These are astronomically conservative (for `rho = 0.5`, `c1` is near
/// 7.9e3 against fitted values of order 1), which is why envelopes are fitted
/// empirically; the explicit forms are kept for reference.
pub fn explicit_bernstein_constants(rho: f64, mu2: f64) -> Result<(f64, f64)> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidInput(format!(
            "dependence coefficient must lie in (0, 1), got {rho}"
        )));
    }
    if !(mu2.is_finite() && mu2 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "moment scale must be positive and finite, got {mu2}"
        )));
    }
    let scale = -rho * rho * rho.ln();
    let e = std::f64::consts::E;
    Ok((32.0 * e * e * mu2 * mu2 / (scale * scale), 8.0 * e / scale))
}

/// Geometric grid of `points` values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(
        lo > 0.0 && hi > lo && points >= 2,
        "log grid needs 0 < lo < hi and at least 2 points"
    );
    let step = (hi / lo).ln() / (points - 1) as f64;
    (0..points).map(|i| lo * (step * i as f64).exp()).collect()
}

/// Default variance-constant grid for envelope fitting.
pub fn default_c1_grid() -> Vec<f64> {
    log_grid(0.1, 5000.0, 60)
}

/// Default linear-term-constant grid for envelope fitting.
pub fn default_c2_grid() -> Vec<f64> {
    log_grid(0.01, 500.0, 60)
}

/// The tightest dominating envelope found on a constant grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnvelopeFit {
    pub c1: f64,
    pub c2: f64,
    /// Fraction of (n, z) grid points where the envelope is at or above the
    /// Wilson upper limit; 1.0 at any reported fit, by construction.
    pub dominated_fraction: f64,
    /// Sum of log envelope values over all grid points (the tightness
    /// objective; smaller is tighter).
    pub log_envelope_sum: f64,
    /// Number of (n, z) points checked.
    pub points: usize,
}

fn shared_tau(estimates: &[TailEstimate]) -> Result<f64> {
    let tau = estimates[0].tau;
    if estimates
        .iter()
        .any(|e| (e.tau - tau).abs() > 1e-12 * tau.max(1.0))
    {
        return Err(Error::InvalidInput(
            "tail estimates mix different Lipschitz budgets".to_string(),
        ));
    }
    Ok(tau)
}

fn distinct_lengths(estimates: &[TailEstimate]) -> usize {
    let mut lengths: Vec<usize> = estimates.iter().map(|e| e.n).collect();
    lengths.sort_unstable();
    lengths.dedup();
    lengths.len()
}

/// Fits the smallest `(c1, c2)` on the given grids such that the Bernstein
/// envelope dominates every Wilson upper limit across all estimates;
/// "smallest" means the minimal summed log envelope, ties resolved toward
/// smaller constants.
pub fn fit_envelope(
    estimates: &[TailEstimate],
    c1_grid: &[f64],
    c2_grid: &[f64],
) -> Result<EnvelopeFit> {
    if distinct_lengths(estimates) < 3 {
        return Err(Error::InvalidInput(
            "envelope fitting needs tails from at least 3 sum lengths".to_string(),
        ));
    }
    if c1_grid.is_empty() || c2_grid.is_empty() {
        return Err(Error::InvalidInput(
            "constant grids must be nonempty".to_string(),
        ));
    }
    let tau = shared_tau(estimates)?;
    let sup_bound = match estimates[0].sup_bound {
        Some(m) if estimates.iter().all(|e| e.sup_bound == Some(m)) => m,
        _ => {
            return Err(Error::InvalidInput(
                "all estimates need the same declared sup bound for the bounded envelope"
                    .to_string(),
            ))
        }
    };

    let points: usize = estimates.iter().map(|e| e.z_grid.len()).sum();
    let mut best: Option<(f64, f64, f64)> = None;
    let mut least_violation = f64::INFINITY;
    let mut violation_site = (0usize, 0.0f64);

    for &c1 in c1_grid {
        for &c2 in c2_grid {
            let mut feasible = true;
            let mut log_sum = 0.0;
            let mut worst = 0.0f64;
            let mut worst_site = (0usize, 0.0f64);
            for estimate in estimates {
                let envelope =
                    bernstein_envelope(tau, sup_bound, estimate.n, &estimate.z_grid, c1, c2);
                for ((&env, &upper), &z) in envelope
                    .iter()
                    .zip(estimate.wilson_upper.iter())
                    .zip(estimate.z_grid.iter())
                {
                    if env < upper {
                        feasible = false;
                        let violation = (upper / env).ln();
                        if violation > worst {
                            worst = violation;
                            worst_site = (estimate.n, z);
                        }
                    }
                    log_sum += env.ln();
                }
            }
            if feasible {
                if best.map_or(true, |(s, _, _)| log_sum < s) {
                    best = Some((log_sum, c1, c2));
                }
            } else if worst < least_violation {
                least_violation = worst;
                violation_site = worst_site;
            }
        }
    }

    match best {
        Some((log_sum, c1, c2)) => Ok(EnvelopeFit {
            c1,
            c2,
            dominated_fraction: 1.0,
            log_envelope_sum: log_sum,
            points,
        }),
        None => Err(Error::NoFeasibleEnvelope(format!(
            "best grid pair still undershoots a Wilson upper limit by e^{:.3} \
             at n = {}, z = {:.3}",
            least_violation, violation_site.0, violation_site.1
        ))),
    }
}

/// Result of fitting the single-constant (Hoeffding-type) envelope
/// `2 exp{-c1 z^2 / (tau^2 n)}` for functionals bounded by 1.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HoeffdingReport {
    /// Largest constant on the grid whose envelope still dominates every
    /// Wilson upper limit (larger is tighter here).
    pub c1: f64,
    /// Pooled R^2 of log empirical tail against `z^2 / (tau^2 n)` over the
    /// moderate-deviation points; `None` when fewer than 3 points qualify.
    pub r_squared: Option<f64>,
    /// Points entering the regression.
    pub regression_points: usize,
}

/// Fits the Hoeffding-type envelope for a family of estimates whose
/// functional is bounded by 1 (`sup_bound <= 1`).
pub fn hoeffding_check(estimates: &[TailEstimate], c1_grid: &[f64]) -> Result<HoeffdingReport> {
    if estimates.is_empty() || c1_grid.is_empty() {
        return Err(Error::InvalidInput(
            "Hoeffding check needs estimates and a nonempty constant grid".to_string(),
        ));
    }
    let tau = shared_tau(estimates)?;
    for estimate in estimates {
        match estimate.sup_bound {
            Some(m) if m <= 1.0 + 1e-12 => {}
            _ => {
                return Err(Error::InvalidInput(
                    "the Hoeffding-type envelope needs a functional bounded by 1".to_string(),
                ))
            }
        }
    }

    let dominates = |c1: f64| -> bool {
        estimates.iter().all(|estimate| {
            estimate
                .z_grid
                .iter()
                .zip(estimate.wilson_upper.iter())
                .all(|(&z, &upper)| {
                    2.0 * (-(c1 * z * z) / (tau * tau * estimate.n as f64)).exp() >= upper
                })
        })
    };

    let mut sorted = c1_grid.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("grid entries are finite"));
    let c1 = sorted
        .into_iter()
        .find(|&c| dominates(c))
        .ok_or_else(|| {
            Error::NoFeasibleEnvelope(
                "even the smallest grid constant fails to dominate the tails".to_string(),
            )
        })?;

    // Moderate-deviation linearity: log tail against z^2/(tau^2 n), using
    // points estimated from at least 10 hits and below the bulk.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for estimate in estimates {
        for (i, &z) in estimate.z_grid.iter().enumerate() {
            let count = estimate.counts[i];
            if count >= 10 && (count as f64) <= 0.75 * estimate.reps as f64 && z > 0.0 {
                xs.push(z * z / (tau * tau * estimate.n as f64));
                ys.push(estimate.frequencies[i].ln());
            }
        }
    }
    let r_squared = if xs.len() >= 3 {
        Some(crate::linalg::ls_line(&xs, &ys).2)
    } else {
        None
    };

    Ok(HoeffdingReport {
        c1,
        r_squared,
        regression_points: xs.len(),
    })
}
