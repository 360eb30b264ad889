//! C ABI for the navar library.
//!
//! Conventions:
//!
//! - Handles ([`NavarPanel`], [`NavarModel`]) are opaque. Every constructor
//!   has a matching `_free`; freeing a null pointer is a no-op.
//! - Fallible calls return a [`NavarStatus`]. On any non-`Ok` status a
//!   human-readable message is retrievable with [`navar_last_error`]; the
//!   pointer stays valid on the calling thread until its next failing call.
//! - Out-parameters are written only on `Ok`.
//! - Matrix buffers are caller-allocated and row-major; query sizes through
//!   the dimension accessors first.
//!
//! The generated C header lives at `include/navar.h` and is refreshed by the
//! build script whenever this file changes.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use navar::design::{DesignCache, Featurizer, DEFAULT_RIDGE_FLOOR};
use navar::error::Error;
use navar::eval::{center_panel, ts_cross_validate, CvConfig};
use navar::sim::{benchmark_spec, simulate, PatternKind, PatternSpec, TimeSeriesPanel};
use navar::solver::{fit, FitConfig, FitResult};

/// Opaque multivariate time-series panel (rows are time points).
pub struct NavarPanel {
    inner: TimeSeriesPanel,
}

/// Opaque fitted influence model: a column centering plus the estimated
/// coefficient blocks and their support.
pub struct NavarModel {
    center: Vec<f64>,
    fit: FitResult,
}

/// Call outcome. Mirrors the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavarStatus {
    /// Success.
    Ok = 0,
    /// A parameter or input failed validation.
    InvalidInput = 2,
    /// A model precondition failed (nonstationary spec, too little data, ...).
    ModelFailure = 3,
    /// Internal error; should not happen.
    Internal = 4,
}

/// Benchmark network shapes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavarPattern {
    Random = 0,
    Band = 1,
    Cluster = 2,
}

impl NavarPattern {
    fn kind(self) -> PatternKind {
        match self {
            NavarPattern::Random => PatternKind::Random,
            NavarPattern::Band => PatternKind::Band,
            NavarPattern::Cluster => PatternKind::Cluster,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn record_failure(message: &str, status: NavarStatus) -> NavarStatus {
    let sanitized = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = sanitized);
    status
}

fn record_error(e: &Error) -> NavarStatus {
    let status = match e.exit_code() {
        2 => NavarStatus::InvalidInput,
        3 => NavarStatus::ModelFailure,
        _ => NavarStatus::Internal,
    };
    record_failure(&e.to_string(), status)
}

fn invalid(message: &str) -> NavarStatus {
    record_failure(message, NavarStatus::InvalidInput)
}

/// Runs a fallible body, translating panics into `Internal` so unwinding
/// never crosses the C boundary.
fn ffi_boundary<F>(body: F) -> NavarStatus
where
    F: FnOnce() -> Result<(), NavarStatus>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => NavarStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => record_failure("internal panic", NavarStatus::Internal),
    }
}

unsafe fn borrow_panel<'a>(panel: *const NavarPanel) -> Result<&'a NavarPanel, NavarStatus> {
    panel.as_ref().ok_or_else(|| invalid("panel handle is null"))
}

unsafe fn borrow_model<'a>(model: *const NavarModel) -> Result<&'a NavarModel, NavarStatus> {
    model.as_ref().ok_or_else(|| invalid("model handle is null"))
}

/// Message for the most recent failure on this thread, as a NUL-terminated
/// UTF-8 string. Valid until the next failing call on the same thread; empty
/// before any failure.
#[no_mangle]
pub extern "C" fn navar_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Simulates a stationary benchmark process and returns a new panel handle
/// in `out`: `n` observations of a `p`-dimensional process whose transition
/// map has `edges_per_row` nonzero components per row in the given pattern,
/// recorded after `burn_in` warm-up steps.
#[no_mangle]
pub extern "C" fn navar_panel_simulate(
    pattern: NavarPattern,
    p: usize,
    edges_per_row: usize,
    n: usize,
    burn_in: usize,
    seed: u64,
    out: *mut *mut NavarPanel,
) -> NavarStatus {
    ffi_boundary(|| {
        if out.is_null() {
            return Err(invalid("out pointer is null"));
        }
        let spec = benchmark_spec(&PatternSpec {
            kind: pattern.kind(),
            p,
            per_row_nonzeros: edges_per_row,
            seed,
        })
        .map_err(|e| record_error(&e))?;
        let panel = simulate(&spec, n, burn_in, seed).map_err(|e| record_error(&e))?;
        unsafe {
            *out = Box::into_raw(Box::new(NavarPanel { inner: panel }));
        }
        Ok(())
    })
}

/// Wraps caller data (row-major, `rows x cols`) in a new panel handle. The
/// buffer is copied; the caller keeps ownership of `data`.
#[no_mangle]
pub extern "C" fn navar_panel_from_data(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut NavarPanel,
) -> NavarStatus {
    ffi_boundary(|| {
        if out.is_null() {
            return Err(invalid("out pointer is null"));
        }
        if data.is_null() {
            return Err(invalid("data pointer is null"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| invalid("rows * cols overflows"))?;
        let values = unsafe { slice::from_raw_parts(data, len) };
        let matrix = ndarray::Array2::from_shape_vec((rows, cols), values.to_vec())
            .expect("shape matches the checked length");
        let panel = TimeSeriesPanel::new(matrix).map_err(|e| record_error(&e))?;
        unsafe {
            *out = Box::into_raw(Box::new(NavarPanel { inner: panel }));
        }
        Ok(())
    })
}

/// Number of time points; 0 for a null handle.
#[no_mangle]
pub extern "C" fn navar_panel_rows(panel: *const NavarPanel) -> usize {
    unsafe { panel.as_ref() }.map_or(0, |p| p.inner.n_rows())
}

/// Number of variables; 0 for a null handle.
#[no_mangle]
pub extern "C" fn navar_panel_cols(panel: *const NavarPanel) -> usize {
    unsafe { panel.as_ref() }.map_or(0, |p| p.inner.n_vars())
}

/// Copies the panel into `out` (row-major); `len` must equal rows * cols.
#[no_mangle]
pub extern "C" fn navar_panel_copy_data(
    panel: *const NavarPanel,
    out: *mut f64,
    len: usize,
) -> NavarStatus {
    ffi_boundary(|| {
        let panel = unsafe { borrow_panel(panel) }?;
        if out.is_null() {
            return Err(invalid("out pointer is null"));
        }
        let needed = panel.inner.data.len();
        if len != needed {
            return Err(invalid(&format!(
                "buffer holds {len} values but the panel has {needed}"
            )));
        }
        let destination = unsafe { slice::from_raw_parts_mut(out, len) };
        for (slot, value) in destination.iter_mut().zip(panel.inner.data.iter()) {
            *slot = *value;
        }
        Ok(())
    })
}

/// Releases a panel handle; null is a no-op.
#[no_mangle]
pub extern "C" fn navar_panel_free(panel: *mut NavarPanel) {
    if !panel.is_null() {
        drop(unsafe { Box::from_raw(panel) });
    }
}

fn fit_centered(
    panel: &TimeSeriesPanel,
    basis_size: usize,
    c0_mult: f64,
    lambda: f64,
) -> Result<NavarModel, Error> {
    let (centered, center) = center_panel(panel)?;
    let half_width = c0_mult * centered.pooled_std();
    let featurizer = Featurizer::fourier(basis_size, half_width)?;
    let cache = DesignCache::build(&centered, featurizer, DEFAULT_RIDGE_FLOOR)?;
    let fit = fit(&cache, &FitConfig::new(lambda))?;
    Ok(NavarModel { center, fit })
}

/// Fits the functional group lasso at a fixed penalty `lambda`, with
/// `basis_size` features per covariate on a support spanning `c0_mult`
/// pooled standard deviations. The panel is column-centered internally.
#[no_mangle]
pub extern "C" fn navar_model_fit(
    panel: *const NavarPanel,
    basis_size: usize,
    c0_mult: f64,
    lambda: f64,
    out: *mut *mut NavarModel,
) -> NavarStatus {
    ffi_boundary(|| {
        let panel = unsafe { borrow_panel(panel) }?;
        if out.is_null() {
            return Err(invalid("out pointer is null"));
        }
        let model = fit_centered(&panel.inner, basis_size, c0_mult, lambda)
            .map_err(|e| record_error(&e))?;
        unsafe {
            *out = Box::into_raw(Box::new(model));
        }
        Ok(())
    })
}

/// Fits with penalty and truncation level chosen by rolling-origin
/// cross-validation at the library defaults (levels {2, 3, 4, 6}, a 30-point
/// anchored penalty path, `folds` folds).
#[no_mangle]
pub extern "C" fn navar_model_fit_cv(
    panel: *const NavarPanel,
    folds: usize,
    out: *mut *mut NavarModel,
) -> NavarStatus {
    ffi_boundary(|| {
        let panel = unsafe { borrow_panel(panel) }?;
        if out.is_null() {
            return Err(invalid("out pointer is null"));
        }
        let (centered, _) = center_panel(&panel.inner).map_err(|e| record_error(&e))?;
        let config = CvConfig {
            folds,
            ..CvConfig::nonlinear_default()
        };
        let selection = ts_cross_validate(&centered, &config).map_err(|e| record_error(&e))?;
        let model = fit_centered(
            &panel.inner,
            selection.basis_size,
            3.0,
            selection.lambda,
        )
        .map_err(|e| record_error(&e))?;
        unsafe {
            *out = Box::into_raw(Box::new(model));
        }
        Ok(())
    })
}

/// Number of variables the model was fitted on; 0 for a null handle.
#[no_mangle]
pub extern "C" fn navar_model_dimension(model: *const NavarModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.fit.coefficients.num_vars())
}

/// Features per covariate; 0 for a null handle.
#[no_mangle]
pub extern "C" fn navar_model_basis_size(model: *const NavarModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.fit.featurizer.block_size())
}

/// Penalty the model was fitted at; NaN for a null handle.
#[no_mangle]
pub extern "C" fn navar_model_lambda(model: *const NavarModel) -> f64 {
    unsafe { model.as_ref() }.map_or(f64::NAN, |m| m.fit.lambda)
}

/// Number of recovered directed edges; 0 for a null handle.
#[no_mangle]
pub extern "C" fn navar_model_edge_count(model: *const NavarModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.fit.support.len())
}

/// Copies the recovered adjacency into `out` (row-major `p x p`;
/// `out[j * p + k]` is 1 when variable `k` drives variable `j`). `len` must
/// equal `p * p`.
#[no_mangle]
pub extern "C" fn navar_model_copy_adjacency(
    model: *const NavarModel,
    out: *mut u8,
    len: usize,
) -> NavarStatus {
    ffi_boundary(|| {
        let model = unsafe { borrow_model(model) }?;
        if out.is_null() {
            return Err(invalid("out pointer is null"));
        }
        let p = model.fit.coefficients.num_vars();
        if len != p * p {
            return Err(invalid(&format!(
                "buffer holds {len} values but the adjacency has {}",
                p * p
            )));
        }
        let destination = unsafe { slice::from_raw_parts_mut(out, len) };
        destination.fill(0);
        for &(j, k) in &model.fit.support {
            destination[j * p + k] = 1;
        }
        Ok(())
    })
}

/// Copies the empirical component norms into `out` (row-major `p x p`;
/// entry `j * p + k` is the fitted norm of the influence of `k` on `j`).
/// `len` must equal `p * p`.
#[no_mangle]
pub extern "C" fn navar_model_copy_group_norms(
    model: *const NavarModel,
    out: *mut f64,
    len: usize,
) -> NavarStatus {
    ffi_boundary(|| {
        let model = unsafe { borrow_model(model) }?;
        if out.is_null() {
            return Err(invalid("out pointer is null"));
        }
        let needed = model.fit.group_norms.len();
        if len != needed {
            return Err(invalid(&format!(
                "buffer holds {len} values but the norm matrix has {needed}"
            )));
        }
        let destination = unsafe { slice::from_raw_parts_mut(out, len) };
        for (slot, value) in destination.iter_mut().zip(model.fit.group_norms.iter()) {
            *slot = *value;
        }
        Ok(())
    })
}

/// One-step conditional-mean forecast: reads the current state from `state`
/// (length `p`) and writes the forecast into `out` (length `p`). The model's
/// training centering is applied and removed internally.
#[no_mangle]
pub extern "C" fn navar_model_predict(
    model: *const NavarModel,
    state: *const f64,
    state_len: usize,
    out: *mut f64,
    out_len: usize,
) -> NavarStatus {
    ffi_boundary(|| {
        let model = unsafe { borrow_model(model) }?;
        if state.is_null() || out.is_null() {
            return Err(invalid("state or out pointer is null"));
        }
        let p = model.fit.coefficients.num_vars();
        if state_len != p || out_len != p {
            return Err(invalid(&format!(
                "state and out must both have length {p}, got {state_len} and {out_len}"
            )));
        }
        let state = unsafe { slice::from_raw_parts(state, state_len) };
        let centered: Vec<f64> = state
            .iter()
            .zip(model.center.iter())
            .map(|(value, mean)| value - mean)
            .collect();
        let forecast = model
            .fit
            .predict_one_step(&centered)
            .map_err(|e| record_error(&e))?;
        let destination = unsafe { slice::from_raw_parts_mut(out, out_len) };
        for (slot, (value, mean)) in destination
            .iter_mut()
            .zip(forecast.iter().zip(model.center.iter()))
        {
            *slot = value + mean;
        }
        Ok(())
    })
}

/// Releases a model handle; null is a no-op.
#[no_mangle]
pub extern "C" fn navar_model_free(model: *mut NavarModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}
