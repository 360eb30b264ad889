//! Specification, validation, and simulation of sparse additive nonlinear
//! VAR(1) processes, including benchmark network patterns and coupling-decay
//! measurement.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal, StudentT};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::func::ComponentFunction;
use crate::rng::{stream_rng, tag};

/// Default power cap when searching for the contraction margin.
pub const DEFAULT_MARGIN_POWER: usize = 60;

/// Number of settling steps before a coupling pair is launched.
const COUPLING_SETTLE_STEPS: usize = 200;

/// Innovation law. Draws are standardized to unit variance and multiplied by
/// the spec's `noise_scale`, so the scale always equals the innovation
/// standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    Gaussian,
    Laplace,
    /// Student t with `df` degrees of freedom; requires `df > 2` so that the
    /// draw can be standardized.
    StudentT { df: f64 },
}

impl NoiseKind {
    fn sample<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            NoiseKind::Gaussian => rng.sample(StandardNormal),
            NoiseKind::Laplace => {
                // Difference of two unit exponentials is Laplace(1) with
                // variance 2; rescale to unit variance.
                let a: f64 = rng.sample(Exp1);
                let b: f64 = rng.sample(Exp1);
                (a - b) / std::f64::consts::SQRT_2
            }
            NoiseKind::StudentT { df } => {
                let t: f64 = rng.sample(StudentT::new(df).expect("validated df"));
                t / (df / (df - 2.0)).sqrt()
            }
        }
    }
}

/// Generative model: which component function sits at each (target, source)
/// pair, plus the innovation law. Indices are 0-based.
#[derive(Debug, Clone)]
pub struct AdditiveVarSpec {
    /// Process dimension.
    pub p: usize,
    /// Sparse transition map: `(target, source) -> component`. Absent pairs
    /// are identically zero.
    pub entries: BTreeMap<(usize, usize), ComponentFunction>,
    /// Innovation standard deviation.
    pub noise_scale: f64,
    /// Innovation law.
    pub noise_kind: NoiseKind,
    /// Seed associated with the specification (used when the caller does not
    /// provide a per-run seed).
    pub seed: u64,
}

impl AdditiveVarSpec {
    /// An empty (pure-noise) specification.
    pub fn new(p: usize, noise_scale: f64, noise_kind: NoiseKind, seed: u64) -> Self {
        AdditiveVarSpec {
            p,
            entries: BTreeMap::new(),
            noise_scale,
            noise_kind,
            seed,
        }
    }

    /// Checks index ranges and noise parameters.
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidInput("dimension p must be positive".into()));
        }
        if !(self.noise_scale > 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::InvalidInput(format!(
                "noise scale must be a positive real, got {}",
                self.noise_scale
            )));
        }
        if let NoiseKind::StudentT { df } = self.noise_kind {
            if !(df > 2.0) {
                return Err(Error::InvalidInput(format!(
                    "student t noise needs df > 2 for a finite variance, got {df}"
                )));
            }
        }
        for &(j, k) in self.entries.keys() {
            if j >= self.p || k >= self.p {
                return Err(Error::InvalidInput(format!(
                    "entry ({j}, {k}) outside dimension {}",
                    self.p
                )));
            }
        }
        Ok(())
    }

    /// Maximum number of nonzero components in any single row.
    pub fn max_row_support(&self) -> usize {
        let mut counts = vec![0usize; self.p];
        for &(j, _) in self.entries.keys() {
            counts[j] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }

    /// Total number of nonzero components.
    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    /// True adjacency of the specification: entry `(j, k)` is 1 when source
    /// `k` enters target `j`.
    pub fn adjacency(&self) -> Array2<u8> {
        let mut a = Array2::<u8>::zeros((self.p, self.p));
        for &(j, k) in self.entries.keys() {
            a[[j, k]] = 1;
        }
        a
    }

    /// Componentwise Lipschitz matrix of the transition map.
    ///
    /// Fails with [`Error::UnboundedComponent`] when a custom entry declares
    /// no Lipschitz constant.
    pub fn lipschitz_matrix(&self) -> Result<LipschitzMatrix> {
        self.validate()?;
        let mut h = Array2::<f64>::zeros((self.p, self.p));
        for (&(j, k), f) in &self.entries {
            match f.lipschitz_constant() {
                Some(l) => h[[j, k]] = l,
                None => return Err(Error::UnboundedComponent { row: j, col: k }),
            }
        }
        Ok(LipschitzMatrix { h })
    }

    /// Per-row lists `(source, component)` sorted by source index, for fast
    /// repeated evaluation of the transition map.
    fn row_components(&self) -> Vec<Vec<(usize, ComponentFunction)>> {
        let mut rows = vec![Vec::new(); self.p];
        for (&(j, k), f) in &self.entries {
            rows[j].push((k, f.clone()));
        }
        rows
    }
}

/// Componentwise Lipschitz matrix of an additive transition map.
#[derive(Debug, Clone)]
pub struct LipschitzMatrix {
    /// Nonnegative matrix; entry `(j, k)` bounds the sensitivity of target
    /// `j` to source `k`.
    pub h: Array2<f64>,
}

impl LipschitzMatrix {
    /// The contraction margin `min_{1 <= m <= m_max} ||H^m||_inf^(1/m)`.
    ///
    /// The process is geometrically ergodic when this is below 1: a single
    /// application of the map may expand in the infinity norm but some power
    /// of the envelope matrix must contract.
    pub fn stability_margin(&self, m_max: usize) -> f64 {
        let p = self.h.nrows();
        if p == 0 {
            return 0.0;
        }
        let mut power = self.h.clone();
        let mut best = f64::INFINITY;
        for m in 1..=m_max.max(1) {
            let norm = inf_norm(&power);
            if norm == 0.0 {
                return 0.0;
            }
            if !norm.is_finite() {
                break;
            }
            best = best.min(norm.powf(1.0 / m as f64));
            if m < m_max {
                power = power.dot(&self.h);
            }
        }
        best
    }
}

fn inf_norm(a: &Array2<f64>) -> f64 {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Observed multivariate series: rows are time points, columns are variables.
#[derive(Debug, Clone)]
pub struct TimeSeriesPanel {
    pub data: Array2<f64>,
    /// Optional per-column names (defaulted to `x1..xp` when serialized).
    pub labels: Option<Vec<String>>,
}

impl TimeSeriesPanel {
    /// Wraps a data matrix, requiring at least two rows and finite entries.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(Error::InsufficientData(format!(
                "a panel needs at least 2 rows, got {}",
                data.nrows()
            )));
        }
        if let Some(((r, c), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {r}, column {c}"
            )));
        }
        Ok(TimeSeriesPanel { data, labels: None })
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.data.ncols()
    }

    /// Population standard deviation pooled over every entry of the panel;
    /// this is the dispersion scale the default basis support is derived from.
    pub fn pooled_std(&self) -> f64 {
        let n = (self.data.len() as f64).max(1.0);
        let mean = self.data.iter().sum::<f64>() / n;
        (self.data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
    }
}

/// Benchmark network shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    /// Sources scattered uniformly per row.
    Random,
    /// A contiguous diagonal band, widened toward the interior at the edges
    /// so every row keeps its full count.
    Band,
    /// Sources confined to 10x10 diagonal blocks, scattered within the block.
    Cluster,
}

/// Specification of a benchmark adjacency pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PatternSpec {
    pub kind: PatternKind,
    pub p: usize,
    /// Number of nonzero sources per row (the benchmark default is 5).
    pub per_row_nonzeros: usize,
    pub seed: u64,
}

/// Side of the diagonal blocks used by [`PatternKind::Cluster`].
pub const CLUSTER_BLOCK: usize = 10;

/// Generates the binary adjacency matrix of a pattern; deterministic given
/// the pattern seed.
pub fn generate_pattern(spec: &PatternSpec) -> Result<Array2<u8>> {
    let (p, m) = (spec.p, spec.per_row_nonzeros);
    if p == 0 || m == 0 {
        return Err(Error::InvalidInput(
            "pattern dimension and per-row count must be positive".into(),
        ));
    }
    if m > p {
        return Err(Error::InvalidInput(format!(
            "cannot place {m} nonzeros in a row of length {p}"
        )));
    }
    let mut a = Array2::<u8>::zeros((p, p));
    match spec.kind {
        PatternKind::Random => {
            let mut rng = stream_rng(spec.seed, &[tag::PATTERN]);
            for j in 0..p {
                for k in rand::seq::index::sample(&mut rng, p, m) {
                    a[[j, k]] = 1;
                }
            }
        }
        PatternKind::Band => {
            let half = m / 2;
            for j in 0..p {
                let lo = j.saturating_sub(half).min(p - m);
                for k in lo..lo + m {
                    a[[j, k]] = 1;
                }
            }
        }
        PatternKind::Cluster => {
            if p % CLUSTER_BLOCK != 0 {
                return Err(Error::InvalidInput(format!(
                    "cluster pattern needs p divisible by {CLUSTER_BLOCK}, got {p}"
                )));
            }
            if m > CLUSTER_BLOCK {
                return Err(Error::InvalidInput(format!(
                    "cluster pattern cannot place {m} nonzeros inside a {CLUSTER_BLOCK}-wide block"
                )));
            }
            let mut rng = stream_rng(spec.seed, &[tag::PATTERN]);
            for b in 0..p / CLUSTER_BLOCK {
                for j in 0..CLUSTER_BLOCK {
                    for k in rand::seq::index::sample(&mut rng, CLUSTER_BLOCK, m) {
                        a[[b * CLUSTER_BLOCK + j, b * CLUSTER_BLOCK + k]] = 1;
                    }
                }
            }
        }
    }
    Ok(a)
}

/// Builds the benchmark process for a pattern: the five suite components are
/// assigned in their canonical order along each row's sorted source indices
/// (cycling when a row holds more than five), with Gaussian innovations of
/// standard deviation 0.2.
pub fn benchmark_spec(pattern: &PatternSpec) -> Result<AdditiveVarSpec> {
    let adjacency = generate_pattern(pattern)?;
    Ok(spec_from_adjacency(
        &adjacency,
        &ComponentFunction::benchmark_suite(),
        0.2,
        NoiseKind::Gaussian,
        pattern.seed,
    ))
}

/// Assigns a cyclic list of components to the nonzero entries of an adjacency
/// matrix, in order along each row's sorted source indices.
pub fn spec_from_adjacency(
    adjacency: &Array2<u8>,
    components: &[ComponentFunction],
    noise_scale: f64,
    noise_kind: NoiseKind,
    seed: u64,
) -> AdditiveVarSpec {
    let p = adjacency.nrows();
    let mut spec = AdditiveVarSpec::new(p, noise_scale, noise_kind, seed);
    for j in 0..p {
        let mut slot = 0usize;
        for k in 0..p {
            if adjacency[[j, k]] != 0 {
                spec.entries
                    .insert((j, k), components[slot % components.len()].clone());
                slot += 1;
            }
        }
    }
    spec
}

/// Advances the state one step: `next` holds the innovation on entry and the
/// new state on exit.
fn transition(rows: &[Vec<(usize, ComponentFunction)>], x: &[f64], next: &mut [f64]) {
    for (j, row) in rows.iter().enumerate() {
        for (k, f) in row {
            next[j] += f.eval(x[*k]);
        }
    }
}

/// Human-readable warning when the burn-in is too short for the contraction
/// to erase the initial state; `None` when the precondition holds.
pub fn burn_in_shortfall(margin: f64, burn_in: usize) -> Option<String> {
    let residual = margin.powi(burn_in as i32);
    if residual >= 1e-8 {
        Some(format!(
            "burn-in {burn_in} leaves initialization residual {residual:.2e} \
             (margin {margin:.4}); results may depend on the start state"
        ))
    } else {
        None
    }
}

/// Simulates `n` rows of the process from the zero state, discarding
/// `burn_in` initial rows. Deterministic given `seed`.
///
/// Fails when the specification is not contractive or when the state leaves
/// the representable range.
pub fn simulate(
    spec: &AdditiveVarSpec,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<TimeSeriesPanel> {
    let x0 = vec![0.0; spec.p];
    simulate_with_initial(spec, &x0, n, burn_in, seed)
}

/// [`simulate`] from an explicit initial state, for experiments that need a
/// non-stationary start (coupling pairs, transient-rich smoke panels).
pub fn simulate_with_initial(
    spec: &AdditiveVarSpec,
    x0: &[f64],
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<TimeSeriesPanel> {
    spec.validate()?;
    if x0.len() != spec.p {
        return Err(Error::InvalidInput(format!(
            "initial state has length {}, expected {}",
            x0.len(),
            spec.p
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "simulation needs n >= 2 rows, got {n}"
        )));
    }
    let margin = spec
        .lipschitz_matrix()?
        .stability_margin(DEFAULT_MARGIN_POWER);
    if margin >= 1.0 {
        return Err(Error::Nonstationary { margin });
    }

    let rows = spec.row_components();
    let mut rng = stream_rng(seed, &[tag::PANEL]);
    let mut x = x0.to_vec();
    let mut next = vec![0.0; spec.p];
    let mut out = Array2::<f64>::zeros((n, spec.p));
    for t in 0..burn_in + n {
        for v in next.iter_mut() {
            *v = spec.noise_scale * spec.noise_kind.sample(&mut rng);
        }
        transition(&rows, &x, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time_index: t });
        }
        std::mem::swap(&mut x, &mut next);
        next.iter_mut().for_each(|v| *v = 0.0);
        if t >= burn_in {
            out.row_mut(t - burn_in).assign(&ndarray::ArrayView1::from(&x[..]));
        }
    }
    TimeSeriesPanel::new(out)
}

/// Mean infinity-norm gap between two coupled paths over `horizon` steps.
///
/// Each replication settles a path into stationarity, perturbs a copy of the
/// state by `initial_gap` (in the infinity norm, along a random direction),
/// and advances both copies with shared innovations. Element `t-1` of the
/// returned vector is the Monte-Carlo mean of `||X_t - X'_t||_inf`; under a
/// contractive specification it decays geometrically.
pub fn coupling_decay(
    spec: &AdditiveVarSpec,
    horizon: usize,
    reps: usize,
    initial_gap: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if horizon == 0 || reps == 0 {
        return Err(Error::InvalidInput(
            "coupling decay needs a positive horizon and replication count".into(),
        ));
    }
    let margin = spec
        .lipschitz_matrix()?
        .stability_margin(DEFAULT_MARGIN_POWER);
    if margin >= 1.0 {
        return Err(Error::Nonstationary { margin });
    }
    let rows = spec.row_components();
    let p = spec.p;

    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, &[tag::COUPLING, rep as u64]);
            let mut x = vec![0.0; p];
            let mut next = vec![0.0; p];
            let step = |state: &mut Vec<f64>, noise: &[f64], scratch: &mut Vec<f64>| {
                scratch.copy_from_slice(noise);
                transition(&rows, state, scratch);
                std::mem::swap(state, scratch);
            };

            let mut noise = vec![0.0; p];
            for _ in 0..COUPLING_SETTLE_STEPS {
                for v in noise.iter_mut() {
                    *v = spec.noise_scale * spec.noise_kind.sample(&mut rng);
                }
                step(&mut x, &noise, &mut next);
            }

            // Random direction normalized to unit infinity norm.
            let mut dir: Vec<f64> = (0..p)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let dmax = dir.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
            dir.iter_mut().for_each(|v| *v *= initial_gap / dmax);
            let mut x2: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + d).collect();
            let mut next2 = vec![0.0; p];

            let mut gaps = Vec::with_capacity(horizon);
            for _ in 0..horizon {
                for v in noise.iter_mut() {
                    *v = spec.noise_scale * spec.noise_kind.sample(&mut rng);
                }
                step(&mut x, &noise, &mut next);
                step(&mut x2, &noise, &mut next2);
                let gap = x
                    .iter()
                    .zip(&x2)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                gaps.push(gap);
            }
            gaps
        })
        .collect();

    let mut decay = vec![0.0; horizon];
    for gaps in &per_rep {
        for (d, g) in decay.iter_mut().zip(gaps) {
            *d += g;
        }
    }
    decay.iter_mut().for_each(|d| *d /= reps as f64);
    Ok(decay)
}

/// Least-squares slope of `log(decay[t])` over the step window
/// `t in [t_lo, t_hi]` (1-based, matching [`coupling_decay`] indexing).
pub fn coupling_log_slope(decay: &[f64], t_lo: usize, t_hi: usize) -> f64 {
    assert!(t_lo >= 1 && t_hi <= decay.len() && t_lo < t_hi);
    let ts: Vec<f64> = (t_lo..=t_hi).map(|t| t as f64).collect();
    let logs: Vec<f64> = (t_lo..=t_hi)
        .map(|t| decay[t - 1].max(1e-300).ln())
        .collect();
    crate::linalg::ls_slope(&ts, &logs)
}
