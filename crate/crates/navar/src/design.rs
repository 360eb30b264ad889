//! Lagged design matrices and per-covariate Gram factorizations.
//!
//! Fitting the group-lasso estimator repeatedly touches three objects: the
//! feature blocks evaluated on lagged states, the per-covariate Gram matrices
//! those blocks induce, and the inverse square roots of the Grams that the
//! closed-form block update needs. [`DesignCache`] computes all of them once
//! per panel and is immutable afterwards, so fits across responses and
//! penalty levels can share it freely.

use ndarray::{s, Array1, Array2, ArrayView2};
use rayon::prelude::*;

use crate::basis::BasisFamily;
use crate::error::{Error, Result};
use crate::linalg::sym_eigh;
use crate::sim::TimeSeriesPanel;

/// Default eigenvalue floor applied to near-singular Gram matrices.
pub const DEFAULT_RIDGE_FLOOR: f64 = 1e-8;

/// Maps a scalar covariate value to its feature row.
///
/// The nonlinear estimator uses a truncated [`BasisFamily`]; the linear
/// autoregressive baseline uses the raw value itself as its single feature.
/// Keeping both behind one type lets fitted models carry their featurization
/// through serialization and prediction.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Featurizer {
    /// Truncated orthonormal basis expansion.
    Fourier { basis: BasisFamily },
    /// The identity map: one feature equal to the covariate value.
    Identity,
}

impl Featurizer {
    /// Builds the basis-expansion featurizer.
    pub fn fourier(size: usize, half_width: f64) -> Result<Self> {
        Ok(Self::Fourier {
            basis: BasisFamily::fourier(size, half_width)?,
        })
    }

    /// Number of features produced per covariate.
    pub fn block_size(&self) -> usize {
        match self {
            Self::Fourier { basis } => basis.size(),
            Self::Identity => 1,
        }
    }

    /// Writes the feature row for covariate value `x` into `out`.
    pub fn fill(&self, x: f64, out: &mut [f64]) {
        match self {
            Self::Fourier { basis } => basis.fill_row(x, out),
            Self::Identity => {
                assert_eq!(out.len(), 1, "identity featurizer produces one feature");
                out[0] = x;
            }
        }
    }

    /// Features for a full state vector, laid out covariate-block by
    /// covariate-block to match [`DesignCache`] rows.
    pub fn featurize_state(&self, state: &[f64]) -> Array1<f64> {
        let block = self.block_size();
        let mut row = Array1::zeros(state.len() * block);
        for (k, &x) in state.iter().enumerate() {
            let slice = row
                .as_slice_mut()
                .expect("freshly allocated row is contiguous");
            self.fill(x, &mut slice[k * block..(k + 1) * block]);
        }
        row
    }
}

/// Immutable lag-one design built from a panel.
///
/// Row `t` of every feature block is computed from panel row `t`, and row `t`
/// of [`DesignCache::targets`] is panel row `t + 1`, so each design row pairs
/// a state with its successor. Gram matrices use the `1/m` convention with
/// `m = n - 1` lagged pairs.
#[derive(Debug, Clone)]
pub struct DesignCache {
    featurizer: Featurizer,
    num_covariates: usize,
    num_samples: usize,
    design: Array2<f64>,
    /// Per-covariate copies of the design blocks in standard layout, so the
    /// solver's per-block matrix-vector products stream contiguous memory
    /// instead of striding across the full design.
    feature_blocks: Vec<Array2<f64>>,
    targets: Array2<f64>,
    grams: Vec<Array2<f64>>,
    gram_isqrts: Vec<Array2<f64>>,
    gram_min_eigenvalues: Vec<f64>,
    degenerate_covariates: Vec<usize>,
    ridge_floor: f64,
}

impl DesignCache {
    /// Builds the cache for `panel` under `featurizer`.
    ///
    /// Gram matrices whose smallest eigenvalue falls below `ridge_floor` get
    /// `ridge_floor` added to every eigenvalue before inversion; the affected
    /// covariates are recorded and surfaced through fit results.
    pub fn build(
        panel: &TimeSeriesPanel,
        featurizer: Featurizer,
        ridge_floor: f64,
    ) -> Result<Self> {
        let n = panel.n_rows();
        let p = panel.n_vars();
        let m = n - 1;
        let block = featurizer.block_size();

        let mut design = Array2::zeros((m, p * block));
        let mut targets = Array2::zeros((m, p));
        let data = &panel.data;
        for t in 0..m {
            let mut design_row = design.row_mut(t);
            let row_slice = design_row
                .as_slice_mut()
                .expect("row of a standard-layout matrix is contiguous");
            for k in 0..p {
                featurizer.fill(data[[t, k]], &mut row_slice[k * block..(k + 1) * block]);
            }
            targets.row_mut(t).assign(&data.row(t + 1));
        }

        Self::from_parts(design, targets, featurizer, ridge_floor)
    }

    /// Builds the cache from an explicit design/target pair.
    ///
    /// Internal seam: lets in-crate tests exercise algebraic invariants (for
    /// example basis rotations) that cannot be expressed through a panel.
    pub(crate) fn from_parts(
        design: Array2<f64>,
        targets: Array2<f64>,
        featurizer: Featurizer,
        ridge_floor: f64,
    ) -> Result<Self> {
        if !(ridge_floor.is_finite() && ridge_floor > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ridge floor must be positive and finite, got {ridge_floor}"
            )));
        }
        let block = featurizer.block_size();
        let m = design.nrows();
        let p = targets.ncols();
        if design.ncols() != p * block || targets.nrows() != m || m == 0 {
            return Err(Error::InvalidInput(format!(
                "design {}x{} and targets {}x{} are inconsistent with block size {block}",
                design.nrows(),
                design.ncols(),
                targets.nrows(),
                targets.ncols(),
            )));
        }

        let feature_blocks: Vec<Array2<f64>> = (0..p)
            .map(|k| design.slice(s![.., k * block..(k + 1) * block]).to_owned())
            .collect();

        let factorizations: Vec<(Array2<f64>, Array2<f64>, f64, bool)> = feature_blocks
            .par_iter()
            .map(|psi| {
                let mut gram = psi.t().dot(psi);
                gram.mapv_inplace(|v| v / m as f64);
                let (eigenvalues, vectors) = sym_eigh(&gram);
                let raw_min = eigenvalues
                    .iter()
                    .fold(f64::INFINITY, |acc, &w| acc.min(w.max(0.0)));
                let degenerate = raw_min < ridge_floor;
                let mut inv_roots = Array1::zeros(block);
                for (slot, &w) in inv_roots.iter_mut().zip(eigenvalues.iter()) {
                    let mut floored = w.max(0.0);
                    if degenerate {
                        floored += ridge_floor;
                    }
                    *slot = 1.0 / floored.sqrt();
                }
                let scaled = &vectors * &inv_roots.view().insert_axis(ndarray::Axis(0));
                let isqrt = scaled.dot(&vectors.t());
                (gram, isqrt, raw_min, degenerate)
            })
            .collect();

        let mut grams = Vec::with_capacity(p);
        let mut gram_isqrts = Vec::with_capacity(p);
        let mut gram_min_eigenvalues = Vec::with_capacity(p);
        let mut degenerate_covariates = Vec::new();
        for (k, (gram, isqrt, raw_min, degenerate)) in factorizations.into_iter().enumerate() {
            grams.push(gram);
            gram_isqrts.push(isqrt);
            gram_min_eigenvalues.push(raw_min);
            if degenerate {
                degenerate_covariates.push(k);
            }
        }

        Ok(Self {
            featurizer,
            num_covariates: p,
            num_samples: m,
            design,
            feature_blocks,
            targets,
            grams,
            gram_isqrts,
            gram_min_eigenvalues,
            degenerate_covariates,
            ridge_floor,
        })
    }

    /// The featurizer the cache was built with.
    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    /// Number of covariates `p`.
    pub fn num_covariates(&self) -> usize {
        self.num_covariates
    }

    /// Number of lagged sample pairs `m = n - 1`.
    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    /// Features per covariate block.
    pub fn block_size(&self) -> usize {
        self.featurizer.block_size()
    }

    /// Full design matrix, shape `[m, p * block_size]`.
    pub fn design(&self) -> ArrayView2<'_, f64> {
        self.design.view()
    }

    /// Design block for covariate `k`, shape `[m, block_size]`. Backed by a
    /// contiguous copy, so iterating it row-by-row is cache-friendly even
    /// when `p * block_size` is large.
    pub fn block(&self, k: usize) -> ArrayView2<'_, f64> {
        self.feature_blocks[k].view()
    }

    /// Response matrix, shape `[m, p]`; row `t` is the state following design
    /// row `t`.
    pub fn targets(&self) -> ArrayView2<'_, f64> {
        self.targets.view()
    }

    /// Gram matrix `(1/m) Psi_k' Psi_k` for covariate `k` (without any ridge
    /// floor applied).
    pub fn gram(&self, k: usize) -> ArrayView2<'_, f64> {
        self.grams[k].view()
    }

    /// Symmetric inverse square root of the (possibly floored) Gram for
    /// covariate `k`.
    pub fn gram_isqrt(&self, k: usize) -> ArrayView2<'_, f64> {
        self.gram_isqrts[k].view()
    }

    /// Smallest Gram eigenvalue (clipped at zero) per covariate.
    pub fn gram_min_eigenvalues(&self) -> &[f64] {
        &self.gram_min_eigenvalues
    }

    /// Covariates whose Gram needed the ridge floor before inversion.
    pub fn degenerate_covariates(&self) -> &[usize] {
        &self.degenerate_covariates
    }

    /// The eigenvalue floor used when a Gram was degenerate.
    pub fn ridge_floor(&self) -> f64 {
        self.ridge_floor
    }

    /// Whether the panel is too short for the block size to be identified
    /// without regularization (`m < block_size + 1`).
    pub fn is_underdetermined(&self) -> bool {
        self.num_samples < self.block_size() + 1
    }

    /// Penalty-defining norm `sqrt(b' Sigma_k b)` for a coefficient block.
    pub fn gram_norm(&self, k: usize, block_coefficients: &[f64]) -> f64 {
        let gram = &self.grams[k];
        let b = self.block_size();
        debug_assert_eq!(block_coefficients.len(), b);
        let mut quad = 0.0;
        for r in 0..b {
            let mut inner = 0.0;
            for c in 0..b {
                inner += gram[[r, c]] * block_coefficients[c];
            }
            quad += block_coefficients[r] * inner;
        }
        quad.max(0.0).sqrt()
    }
}
