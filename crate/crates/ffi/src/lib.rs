//! C ABI over `consensus_flow`.
//!
//! Graphs and trajectories cross the boundary as opaque handles created by
//! `cf_*_new`/`cf_integrate_*` and released with the matching `*_free`.
//! Every fallible call returns a [`CfStatus`]; on failure a message is
//! kept per thread and can be read with [`cf_last_error`]. Output arrays
//! are caller-allocated and their length is passed alongside.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use consensus_flow::flow::{
    flow_map, integrate_linear, integrate_nonlinear, NonlinearSpec, Trajectory,
};
use consensus_flow::metric::{gradient_identity_residual, metric_matrix};
use consensus_flow::verify::{run_verification_suite, Mode};
use consensus_flow::{
    build_laplacian, log_mean, perron_vector, Edge, Error, LaplacianMatrix, WeightedDigraph,
};
use consensus_flow::{builtin_entropy, builtin_gibbs, builtin_quadratic, ConvexPotential};
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGraph = 3,
    Reducible = 4,
    Domain = 5,
    NotSymmetric = 6,
    Numerical = 7,
    BufferSize = 8,
    Panic = 9,
}

/// Values accepted by the `potential` parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfPotential {
    Quadratic = 0,
    Entropy = 1,
    Gibbs = 2,
}

/// Values accepted by the `mode` parameter of [`cf_verify`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfMode {
    Normal = 0,
    Strict = 1,
    Lenient = 2,
}

/// Validated graph Laplacian.
pub struct CfLaplacian {
    inner: LaplacianMatrix,
}

/// Sampled solution of a consensus system.
pub struct CfTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(CfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidGraph(_) | Error::Parse { .. } => CfStatus::InvalidGraph,
            Error::Reducible => CfStatus::Reducible,
            Error::NotSymmetric(_) => CfStatus::NotSymmetric,
            e if e.is_domain() => CfStatus::Domain,
            Error::StepTooLarge { .. }
            | Error::NotStrictlyIncreasing { .. }
            | Error::NotConvex { .. } => CfStatus::Numerical,
            _ => CfStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CfStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            CfStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(
    p: *mut f64,
    len: usize,
    need: usize,
    what: &str,
) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Fail(
            CfStatus::BufferSize,
            format!("`{what}` holds {len} values, {need} required"),
        ));
    }
    Ok(slice::from_raw_parts_mut(p, need))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn laplacian<'a>(l: *const CfLaplacian) -> Result<&'a LaplacianMatrix, Fail> {
    l.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| null("laplacian"))
}

unsafe fn trajectory<'a>(t: *const CfTrajectory) -> Result<&'a Trajectory, Fail> {
    t.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| null("trajectory"))
}

fn potential(code: u32, reference: f64) -> Result<ConvexPotential, Fail> {
    match code {
        0 => Ok(builtin_quadratic(reference)),
        1 => Ok(builtin_entropy()),
        2 => Ok(builtin_gibbs()),
        other => Err(Fail(
            CfStatus::InvalidArgument,
            format!("unknown potential code {other}"),
        )),
    }
}

fn copy_matrix(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..n {
            out[i * n + j] = m[(i, j)];
        }
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds the Laplacian of a graph with `m` directed edges `sources[k] ->
/// targets[k]` of weight `weights[k]`.
///
/// # Safety
/// The three edge arrays must hold `m` elements each; `out` must be a valid
/// pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cf_laplacian_new(
    n: usize,
    sources: *const usize,
    targets: *const usize,
    weights: *const f64,
    m: usize,
    out: *mut *mut CfLaplacian,
) -> CfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let edges = if m == 0 {
            Vec::new()
        } else {
            if sources.is_null() || targets.is_null() || weights.is_null() {
                return Err(null("edge arrays"));
            }
            let (s, t, w) = (
                slice::from_raw_parts(sources, m),
                slice::from_raw_parts(targets, m),
                slice::from_raw_parts(weights, m),
            );
            (0..m).map(|k| Edge::new(s[k], t[k], w[k])).collect()
        };
        let g = WeightedDigraph::new(n, edges)?;
        let handle = Box::new(CfLaplacian {
            inner: build_laplacian(&g),
        });
        out.write(Box::into_raw(handle));
        Ok(())
    })
}

/// Parses the edge-list text format (`n <count>` header, then `i j w`
/// lines) into a Laplacian handle.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` as in [`cf_laplacian_new`].
#[no_mangle]
pub unsafe extern "C" fn cf_laplacian_from_edge_list(
    text: *const c_char,
    out: *mut *mut CfLaplacian,
) -> CfStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CStr::from_ptr(text).to_str().map_err(|e| {
            Fail(
                CfStatus::InvalidGraph,
                format!("edge list is not UTF-8: {e}"),
            )
        })?;
        let g = WeightedDigraph::from_edge_list(s)?;
        out.write(Box::into_raw(Box::new(CfLaplacian {
            inner: build_laplacian(&g),
        })));
        Ok(())
    })
}

/// # Safety
/// `l` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cf_laplacian_free(l: *mut CfLaplacian) {
    if !l.is_null() {
        drop(Box::from_raw(l));
    }
}

/// Node count, or 0 for NULL.
///
/// # Safety
/// `l` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_laplacian_size(l: *const CfLaplacian) -> usize {
    l.as_ref().map_or(0, |h| h.inner.n())
}

/// 1 if symmetric, 0 otherwise (including NULL).
///
/// # Safety
/// `l` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_laplacian_is_symmetric(l: *const CfLaplacian) -> i32 {
    l.as_ref().map_or(0, |h| h.inner.is_symmetric() as i32)
}

/// Row-major `n * n` entries of `L`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cf_laplacian_entries(
    l: *const CfLaplacian,
    out: *mut f64,
    len: usize,
) -> CfStatus {
    guard(|| {
        let l = laplacian(l)?;
        let n = l.n();
        copy_matrix(l.entries(), output(out, len, n * n, "out")?);
        Ok(())
    })
}

/// Perron vector `q` (`q^T L = 0`, `q > 0`, `sum q = 1`).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cf_perron_vector(
    l: *const CfLaplacian,
    out: *mut f64,
    len: usize,
) -> CfStatus {
    guard(|| {
        let l = laplacian(l)?;
        let q = perron_vector(l)?;
        output(out, len, l.n(), "out")?.copy_from_slice(q.as_vector().as_slice());
        Ok(())
    })
}

/// Row-major `exp(-L t)`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cf_flow_map(
    l: *const CfLaplacian,
    t: f64,
    out: *mut f64,
    len: usize,
) -> CfStatus {
    guard(|| {
        let l = laplacian(l)?;
        let n = l.n();
        let buf = output(out, len, n * n, "out")?;
        copy_matrix(flow_map(l, t)?.matrix(), buf);
        Ok(())
    })
}

/// Row-major inverse metric `G^{-1}(x)` for a [`CfPotential`] code;
/// `reference` is the quadratic minimizer and ignored otherwise.
///
/// # Safety
/// `x` must hold `n` doubles and `out` `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cf_metric_matrix(
    l: *const CfLaplacian,
    potential_code: u32,
    reference: f64,
    x: *const f64,
    n: usize,
    alpha: f64,
    out: *mut f64,
    len: usize,
) -> CfStatus {
    guard(|| {
        let l = laplacian(l)?;
        let h = potential(potential_code, reference)?;
        let x = DVector::from_column_slice(input(x, n, "x")?);
        let g = metric_matrix(l, &h, &x, alpha)?;
        copy_matrix(g.entries(), output(out, len, l.n() * l.n(), "out")?);
        Ok(())
    })
}

/// Relative residual of `L x = G^{-1}(x) grad V(x)`.
///
/// # Safety
/// `x` must hold `n` doubles; `residual` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_gradient_identity_residual(
    l: *const CfLaplacian,
    potential_code: u32,
    reference: f64,
    x: *const f64,
    n: usize,
    alpha: f64,
    residual: *mut f64,
) -> CfStatus {
    guard(|| {
        let l = laplacian(l)?;
        let h = potential(potential_code, reference)?;
        let x = DVector::from_column_slice(input(x, n, "x")?);
        write(
            residual,
            gradient_identity_residual(l, &h, &x, alpha)?,
            "residual",
        )
    })
}

/// Logarithmic mean of two positive numbers.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_log_mean(a: f64, b: f64, out: *mut f64) -> CfStatus {
    guard(|| write(out, log_mean(a, b)?, "out"))
}

fn store_trajectory(t: Trajectory, out: *mut *mut CfTrajectory) {
    unsafe { out.write(Box::into_raw(Box::new(CfTrajectory { inner: t }))) }
}

/// RK4 solution of `x' = -L x` from `x0` sampled every `dt` up to `t_end`.
///
/// # Safety
/// `x0` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_integrate_linear(
    l: *const CfLaplacian,
    x0: *const f64,
    n: usize,
    t_end: f64,
    dt: f64,
    out: *mut *mut CfTrajectory,
) -> CfStatus {
    guard(|| {
        let l = laplacian(l)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x0 = DVector::from_column_slice(input(x0, n, "x0")?);
        store_trajectory(integrate_linear(l, &x0, t_end, dt)?, out);
        Ok(())
    })
}

/// Log-Laplacian flow `x' = -L ln(x / alpha)` from a positive `x0`.
///
/// # Safety
/// As [`cf_integrate_linear`].
#[no_mangle]
pub unsafe extern "C" fn cf_integrate_log_laplacian(
    l: *const CfLaplacian,
    x0: *const f64,
    n: usize,
    alpha: f64,
    t_end: f64,
    dt: f64,
    out: *mut *mut CfTrajectory,
) -> CfStatus {
    guard(|| {
        let l = laplacian(l)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x0 = DVector::from_column_slice(input(x0, n, "x0")?);
        let spec = NonlinearSpec::log_laplacian(alpha)?;
        store_trajectory(integrate_nonlinear(l, &spec, &x0, t_end, dt)?, out);
        Ok(())
    })
}

/// # Safety
/// `t` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_trajectory_free(t: *mut CfTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of samples, or 0 for NULL.
///
/// # Safety
/// `t` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_trajectory_len(t: *const CfTrajectory) -> usize {
    t.as_ref().map_or(0, |h| h.inner.len())
}

/// State dimension, or 0 for NULL.
///
/// # Safety
/// `t` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_trajectory_dim(t: *const CfTrajectory) -> usize {
    t.as_ref().map_or(0, |h| h.inner.dim())
}

/// Sample times.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cf_trajectory_times(
    t: *const CfTrajectory,
    out: *mut f64,
    len: usize,
) -> CfStatus {
    guard(|| {
        let t = trajectory(t)?;
        output(out, len, t.len(), "out")?.copy_from_slice(t.times());
        Ok(())
    })
}

/// State at sample `k`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cf_trajectory_state(
    t: *const CfTrajectory,
    k: usize,
    out: *mut f64,
    len: usize,
) -> CfStatus {
    guard(|| {
        let t = trajectory(t)?;
        let x = t.states().get(k).ok_or_else(|| {
            Fail(
                CfStatus::InvalidArgument,
                format!("sample {k} out of range ({} samples)", t.len()),
            )
        })?;
        output(out, len, t.dim(), "out")?.copy_from_slice(x.as_slice());
        Ok(())
    })
}

/// Runs the verification suite over `count` instances of each size and
/// reports the number of checks run and failed. A completed run returns
/// `CF_STATUS_OK` even when checks fail.
///
/// # Safety
/// `sizes` must hold `num_sizes` elements; `total` and `failed` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cf_verify(
    seed: u64,
    count: usize,
    sizes: *const usize,
    num_sizes: usize,
    mode: u32,
    total: *mut usize,
    failed: *mut usize,
) -> CfStatus {
    guard(|| {
        let mode = match mode {
            0 => Mode::Normal,
            1 => Mode::Strict,
            2 => Mode::Lenient,
            other => {
                return Err(Fail(
                    CfStatus::InvalidArgument,
                    format!("unknown mode {other}"),
                ))
            }
        };
        let sizes = if num_sizes == 0 {
            &[][..]
        } else if sizes.is_null() {
            return Err(null("sizes"));
        } else {
            slice::from_raw_parts(sizes, num_sizes)
        };
        if total.is_null() || failed.is_null() {
            return Err(null("total/failed"));
        }
        let reports = run_verification_suite(seed, count, sizes, mode)?;
        total.write(reports.len());
        failed.write(reports.iter().filter(|r| !r.passed).count());
        Ok(())
    })
}
