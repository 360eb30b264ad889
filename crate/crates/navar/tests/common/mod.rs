//! Shared fixtures for the integration suites: random problem instances and
//! an independently implemented proximal-gradient solver that serves as a
//! correctness oracle for the block-coordinate-descent estimator.
//!
//! Nothing here reuses the library's linear algebra: eigendecompositions are
//! done with a local Jacobi sweep and objectives are evaluated from the raw
//! design blocks, so agreement between the two solvers is evidence rather
//! than circularity.

#![allow(dead_code)]

use ndarray::{Array1, Array2, Array3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use navar::design::{DesignCache, Featurizer, DEFAULT_RIDGE_FLOOR};
use navar::sim::TimeSeriesPanel;
use navar::solver::CoefficientTensor;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Panel of independent standard-normal entries (a generic well-conditioned
/// regression instance; no time-series structure is needed to test the
/// optimizer).
pub fn random_panel(rng: &mut ChaCha8Rng, n: usize, p: usize) -> TimeSeriesPanel {
    let data = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
    TimeSeriesPanel::new(data).expect("normal draws form a valid panel")
}

/// Design cache over `panel` with `basis_size` Fourier features per
/// covariate on a `c0_mult` pooled-standard-deviation support.
pub fn fourier_cache(panel: &TimeSeriesPanel, basis_size: usize, c0_mult: f64) -> DesignCache {
    let half_width = c0_mult * panel.pooled_std();
    let featurizer = Featurizer::fourier(basis_size, half_width).expect("valid basis size");
    DesignCache::build(panel, featurizer, DEFAULT_RIDGE_FLOOR).expect("cache builds")
}

// ---------------------------------------------------------------------------
// Independent linear algebra (cyclic Jacobi), kept deliberately simple.
// ---------------------------------------------------------------------------

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors-as-columns).
fn jacobi_eigh(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "Jacobi needs a square matrix");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() < 1e-15 {
            break;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if m[[i, j]].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (m[[j, j]] - m[[i, i]]) / m[[i, j]];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mik = m[[i, k]];
                    let mjk = m[[j, k]];
                    m[[i, k]] = c * mik - s * mjk;
                    m[[j, k]] = s * mik + c * mjk;
                }
                for k in 0..n {
                    let mki = m[[k, i]];
                    let mkj = m[[k, j]];
                    m[[k, i]] = c * mki - s * mkj;
                    m[[k, j]] = s * mki + c * mkj;
                }
                for k in 0..n {
                    let vki = v[[k, i]];
                    let vkj = v[[k, j]];
                    v[[k, i]] = c * vki - s * vkj;
                    v[[k, j]] = s * vki + c * vkj;
                }
            }
        }
    }
    let eigenvalues = (0..n).map(|i| m[[i, i]]).collect();
    (eigenvalues, v)
}

/// Inverse square root of a positive-definite matrix. Panics when the matrix
/// is near-singular; oracle instances are kept well-conditioned on purpose.
fn inv_sqrt_pd(a: &Array2<f64>) -> Array2<f64> {
    let (eigenvalues, vectors) = jacobi_eigh(a);
    let n = a.nrows();
    let mut out = Array2::<f64>::zeros((n, n));
    for (idx, &w) in eigenvalues.iter().enumerate() {
        assert!(
            w > 1e-10,
            "oracle requires a well-conditioned Gram matrix, got eigenvalue {w:e}"
        );
        let scale = 1.0 / w.sqrt();
        for r in 0..n {
            for c in 0..n {
                out[[r, c]] += scale * vectors[[r, idx]] * vectors[[c, idx]];
            }
        }
    }
    out
}

fn max_eigenvalue(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut x = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut value = 0.0;
    for _ in 0..500 {
        let y = a.dot(&x);
        let norm = y.dot(&y).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        x = y / norm;
        value = norm;
    }
    value
}

// ---------------------------------------------------------------------------
// Proximal-gradient (FISTA) oracle.
// ---------------------------------------------------------------------------

/// Oracle solution: coefficients and the objective evaluated independently.
pub struct OracleFit {
    pub coefficients: CoefficientTensor,
    pub objective: f64,
}

/// Group-lasso objective evaluated from the raw design blocks, without any
/// cached factorizations:
/// `(1/m) sum_j ||y_j - sum_k Psi_k b_jk||^2 + lambda sum_jk sqrt(b' (Psi_k'Psi_k / m) b)`.
pub fn reference_objective(cache: &DesignCache, b: &CoefficientTensor, lambda: f64) -> f64 {
    let p = cache.num_covariates();
    let m = cache.num_samples();
    let grams: Vec<Array2<f64>> = (0..p)
        .map(|k| {
            let psi = cache.block(k);
            psi.t().dot(&psi) / m as f64
        })
        .collect();
    let mut total = 0.0;
    for j in 0..p {
        let mut residual: Array1<f64> = cache.targets().column(j).to_owned();
        for k in 0..p {
            let contribution = cache.block(k).dot(&b.block(j, k).to_owned());
            residual -= &contribution;
        }
        total += residual.dot(&residual) / m as f64;
        for (k, gram) in grams.iter().enumerate() {
            let block = b.block(j, k).to_owned();
            total += lambda * block.dot(&gram.dot(&block)).max(0.0).sqrt();
        }
    }
    total
}

/// Solves the functional group lasso by FISTA on whitened coordinates.
///
/// Each response is an independent problem. With `theta_k = Sigma_k^{1/2}
/// b_k` the penalty becomes a plain Euclidean group norm, and the smooth part
/// has gradient `2 (G theta - q)` with `G = W'W/m`, `q = W'y/m`, where `W`
/// stacks the whitened blocks `Psi_k Sigma_k^{-1/2}`. Accelerated steps use
/// `1 / (2 lambda_max(G))` with a monotone restart.
pub fn fista_oracle(cache: &DesignCache, lambda: f64) -> OracleFit {
    let p = cache.num_covariates();
    let l = cache.block_size();
    let m = cache.num_samples();
    let width = p * l;

    let isqrts: Vec<Array2<f64>> = (0..p)
        .map(|k| {
            let psi = cache.block(k);
            inv_sqrt_pd(&(psi.t().dot(&psi) / m as f64))
        })
        .collect();

    let mut whitened = Array2::<f64>::zeros((m, width));
    for (k, isqrt) in isqrts.iter().enumerate() {
        let block = cache.block(k).dot(isqrt);
        whitened
            .slice_mut(ndarray::s![.., k * l..(k + 1) * l])
            .assign(&block);
    }
    let gram = whitened.t().dot(&whitened) / m as f64;
    let step = 1.0 / (2.0 * max_eigenvalue(&gram) * 1.000001);

    let smooth = |theta: &Array1<f64>, q: &Array1<f64>, y_norm: f64| -> f64 {
        y_norm + theta.dot(&gram.dot(theta)) - 2.0 * q.dot(theta)
    };
    let penalty = |theta: &Array1<f64>| -> f64 {
        (0..p)
            .map(|k| {
                let block = theta.slice(ndarray::s![k * l..(k + 1) * l]);
                lambda * block.dot(&block).sqrt()
            })
            .sum()
    };

    let mut values = Array3::<f64>::zeros((p, p, l));
    for j in 0..p {
        let y: Array1<f64> = cache.targets().column(j).to_owned();
        let q = whitened.t().dot(&y) / m as f64;
        let y_norm = y.dot(&y) / m as f64;

        let mut theta = Array1::<f64>::zeros(width);
        let mut anchor = theta.clone();
        let mut momentum = 1.0_f64;
        let mut best = smooth(&theta, &q, y_norm) + penalty(&theta);
        let mut stall = 0;
        for _ in 0..60_000 {
            let gradient = 2.0 * (gram.dot(&anchor) - &q);
            let mut candidate = &anchor - &(step * &gradient);
            for k in 0..p {
                let mut block = candidate.slice_mut(ndarray::s![k * l..(k + 1) * l]);
                let norm = block.dot(&block).sqrt();
                if norm <= step * lambda {
                    block.fill(0.0);
                } else {
                    let scale = 1.0 - step * lambda / norm;
                    block.mapv_inplace(|v| v * scale);
                }
            }
            let value = smooth(&candidate, &q, y_norm) + penalty(&candidate);
            if value > best {
                // Monotone restart: drop the momentum and retry from the
                // best iterate.
                anchor = theta.clone();
                momentum = 1.0;
                continue;
            }
            let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let blend = (momentum - 1.0) / next_momentum;
            anchor = &candidate + &(blend * (&candidate - &theta));
            theta = candidate;
            momentum = next_momentum;
            if best - value <= 1e-14 * best.abs().max(1.0) {
                stall += 1;
                if stall >= 20 {
                    break;
                }
            } else {
                stall = 0;
            }
            best = value;
        }

        for k in 0..p {
            let block = theta.slice(ndarray::s![k * l..(k + 1) * l]).to_owned();
            let mapped = isqrts[k].dot(&block);
            for (i, &value) in mapped.iter().enumerate() {
                values[[j, k, i]] = value;
            }
        }
    }

    let coefficients =
        CoefficientTensor::from_values(values).expect("oracle tensor has a valid shape");
    let objective = reference_objective(cache, &coefficients, lambda);
    OracleFit {
        coefficients,
        objective,
    }
}

// ---------------------------------------------------------------------------
// Brute-force ranking metrics (for property tests against the library).
// ---------------------------------------------------------------------------

/// AUROC by direct enumeration of positive/negative pairs, ties counted half.
pub fn brute_force_auroc(scores: &[f64], truth: &[bool]) -> f64 {
    let positives: Vec<f64> = scores
        .iter()
        .zip(truth)
        .filter(|(_, &t)| t)
        .map(|(&s, _)| s)
        .collect();
    let negatives: Vec<f64> = scores
        .iter()
        .zip(truth)
        .filter(|(_, &t)| !t)
        .map(|(&s, _)| s)
        .collect();
    let mut wins = 0.0;
    for &pos in &positives {
        for &neg in &negatives {
            if pos > neg {
                wins += 1.0;
            } else if pos == neg {
                wins += 0.5;
            }
        }
    }
    wins / (positives.len() as f64 * negatives.len() as f64)
}

/// Average precision by direct sweep over grouped score thresholds.
pub fn brute_force_average_precision(scores: &[f64], truth: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    thresholds.dedup();
    let total_positives = truth.iter().filter(|&&t| t).count() as f64;
    let mut previous_recall = 0.0;
    let mut ap = 0.0;
    for &threshold in &thresholds {
        let mut predicted = 0.0;
        let mut hits = 0.0;
        for (&s, &t) in scores.iter().zip(truth) {
            if s >= threshold {
                predicted += 1.0;
                if t {
                    hits += 1.0;
                }
            }
        }
        let precision = hits / predicted;
        let recall = hits / total_positives;
        ap += (recall - previous_recall) * precision;
        previous_recall = recall;
    }
    ap
}
