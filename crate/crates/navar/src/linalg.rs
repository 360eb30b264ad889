//! Small dense linear-algebra kernels: symmetric eigendecomposition and
//! Gauss-Legendre quadrature rules.
//!
//! The matrices that need factorizing here are per-covariate Gram matrices of
//! side at most a few dozen, so a cyclic Jacobi sweep is both simple and
//! numerically robust; no external LAPACK binding is pulled in for it.

use ndarray::{Array1, Array2};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues ascending and
/// eigenvectors as columns, so that `a = v * diag(w) * v^T`.
///
/// # Panics
/// Panics if `a` is not square.
pub fn sym_eigh(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eigh requires a square matrix");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    if n <= 1 {
        return (m.diag().to_owned(), v);
    }

    let frob = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * frob;
    for _sweep in 0..128 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for i in 0..n {
                    let aip = m[[i, p]];
                    let aiq = m[[i, q]];
                    m[[i, p]] = c * aip - s * aiq;
                    m[[i, q]] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = m[[p, i]];
                    let aqi = m[[q, i]];
                    m[[p, i]] = c * api - s * aqi;
                    m[[q, i]] = s * api + c * aqi;
                }
                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = c * vip - s * viq;
                    v[[i, q]] = s * vip + c * viq;
                }
            }
        }
    }

    // Sort eigenpairs ascending.
    let mut idx: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    idx.sort_by(|&a, &b| diag[a].partial_cmp(&diag[b]).unwrap());
    let w = Array1::from_iter(idx.iter().map(|&i| diag[i]));
    let mut vs = Array2::<f64>::zeros((n, n));
    for (new_col, &old_col) in idx.iter().enumerate() {
        for r in 0..n {
            vs[[r, new_col]] = v[[r, old_col]];
        }
    }
    (w, vs)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Nodes are computed by Newton iteration on the Legendre polynomial with the
/// standard Chebyshev initial guess; accurate to machine precision for the
/// orders used here (up to a few hundred points).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Initial guess: Chebyshev-like approximation to the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        // Middle node of odd rules is exactly zero.
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrates `f` over `[lo, hi]` with an `n`-point Gauss-Legendre rule.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let mid = 0.5 * (lo + hi);
    let scale = 0.5 * (hi - lo);
    nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| w * f(mid + scale * x))
        .sum::<f64>()
        * scale
}

/// Least-squares slope of `y` against `x`.
///
/// # Panics
/// Panics when fewer than two points are supplied.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    ls_line(x, y).0
}

/// Least-squares line of `y` against `x`: `(slope, intercept, r_squared)`.
///
/// `r_squared` is the fraction of the variance of `y` explained by the line
/// (1.0 when `y` is constant, by convention).
///
/// # Panics
/// Panics when fewer than two points are supplied.
pub fn ls_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert!(x.len() == y.len() && x.len() >= 2, "ls_line needs >= 2 paired points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r_squared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn jacobi_reconstructs_random_symmetric_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in [1usize, 2, 3, 6, 16, 64] {
            let mut a = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..=i {
                    let x: f64 = rng.gen_range(-1.0..1.0);
                    a[[i, j]] = x;
                    a[[j, i]] = x;
                }
            }
            let (w, v) = sym_eigh(&a);
            let recon = v.dot(&Array2::from_diag(&w)).dot(&v.t());
            let num = (&recon - &a).iter().map(|x| x * x).sum::<f64>().sqrt();
            let den = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            assert!(num / den < 1e-12, "n={n}: relative error {}", num / den);
            // Eigenvalues ascending, eigenvectors orthonormal.
            for i in 1..n {
                assert!(w[i] >= w[i - 1]);
            }
            let vtv = v.t().dot(&v);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((vtv[[i, j]] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn jacobi_matches_hand_eigenvalues() {
        let a = arr2(&[[2.0, 1.0], [1.0, 2.0]]);
        let (w, _) = sym_eigh(&a);
        assert!((w[0] - 1.0).abs() < 1e-14);
        assert!((w[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // An n-point rule is exact for degree 2n-1.
        let (nodes, weights) = gauss_legendre(5);
        let int_x8: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&x, &w)| w * x.powi(8))
            .sum();
        assert!((int_x8 - 2.0 / 9.0).abs() < 1e-14);
        let total: f64 = weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_handles_transcendental_integrands() {
        // Integral of cos over [0, pi/2] is 1.
        let v = integrate(f64::cos, 0.0, std::f64::consts::FRAC_PI_2, 32);
        assert!((v - 1.0).abs() < 1e-13);
        // High-order rules stay stable.
        let v2 = integrate(|x| (-x * x).exp(), -6.0, 6.0, 256);
        assert!((v2 - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn slope_of_exact_line_is_recovered() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [0.5, 1.0, 1.5, 2.0];
        assert!((ls_slope(&x, &y) - 0.5).abs() < 1e-14);
    }
}
