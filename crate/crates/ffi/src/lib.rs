//! C interface to the `hpsg` sparse grid library.
//!
//! Grids are returned as opaque `HpsgGrid` handles that must be released
//! with [`hpsg_grid_free`]. Every fallible function returns an
//! [`HpsgStatus`]; on failure a description is available from
//! [`hpsg_last_error_message`] on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::convert::Infallible;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hpsg::bench::{FunctionKind, TestFunction};
use hpsg::kink::estimate_from_samples;
use hpsg::refine::{build, build_serial, RefineConfig, RefineError, Strategy};
use hpsg::{Domain, GridError, SparseGrid};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HpsgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfDomain = 3,
    /// The user callback reported failure or returned a non-finite value.
    CallbackFailed = 4,
    Io = 5,
    Parse = 6,
    /// The request is valid but no result exists (e.g. too few samples).
    NotAvailable = 7,
    Internal = 8,
}

/// Degree selection strategies, for [`HpsgBuildOptions::strategy`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HpsgStrategy {
    Linear = 0,
    Highest = 1,
    Greedy = 2,
    Kink = 3,
}

/// Refinement settings. Obtain defaults from [`hpsg_default_options`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HpsgBuildOptions {
    /// One of the `HpsgStrategy` values.
    pub strategy: i32,
    pub w_max: f64,
    pub w_kink: f64,
    pub p_max: u8,
    pub q_min: u32,
    pub q_max: u32,
}

/// Opaque grid handle.
pub struct HpsgGrid {
    grid: SparseGrid,
}

/// Target function for [`hpsg_build`]. Writes `f(x)` to `out` and returns 0,
/// or returns non-zero on failure.
pub type HpsgFunction =
    Option<unsafe extern "C" fn(x: *const f64, dim: usize, user_data: *mut c_void, out: *mut f64) -> i32>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: HpsgStatus, msg: impl Into<String>) -> HpsgStatus {
    set_error(msg);
    status
}

fn guard(body: impl FnOnce() -> HpsgStatus) -> HpsgStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(HpsgStatus::Internal, format!("internal error: {msg}"))
        }
    }
}

fn grid_status(e: &GridError) -> HpsgStatus {
    match e {
        GridError::Domain(_) | GridError::DimensionMismatch { .. } => HpsgStatus::OutOfDomain,
        GridError::Io(_) => HpsgStatus::Io,
        GridError::Parse { .. } => HpsgStatus::Parse,
        _ => HpsgStatus::InvalidArgument,
    }
}

fn refine_status(e: &RefineError) -> HpsgStatus {
    match e {
        RefineError::Config(_) => HpsgStatus::InvalidArgument,
        RefineError::Evaluation { .. } => HpsgStatus::CallbackFailed,
        RefineError::Grid(g) => grid_status(g),
        RefineError::NotEvaluated(_) => HpsgStatus::Internal,
    }
}

fn strategy_from(code: i32) -> Option<Strategy> {
    match code {
        0 => Some(Strategy::Linear),
        1 => Some(Strategy::Highest),
        2 => Some(Strategy::Greedy),
        3 => Some(Strategy::Kink),
        _ => None,
    }
}

unsafe fn config_from(opts: *const HpsgBuildOptions, domain: Domain) -> Result<RefineConfig, HpsgStatus> {
    let opts = if opts.is_null() {
        hpsg_default_options()
    } else {
        *opts
    };
    let Some(strategy) = strategy_from(opts.strategy) else {
        return Err(fail(
            HpsgStatus::InvalidArgument,
            format!("unknown strategy code {}", opts.strategy),
        ));
    };
    let mut cfg = RefineConfig::new(strategy, opts.w_max, domain);
    cfg.w_kink = opts.w_kink;
    cfg.p_max = opts.p_max;
    cfg.q_min = opts.q_min;
    cfg.q_max = opts.q_max;
    cfg.validate()
        .map_err(|e| fail(HpsgStatus::InvalidArgument, e.to_string()))?;
    Ok(cfg)
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, HpsgStatus> {
    if s.is_null() {
        return Err(fail(HpsgStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(HpsgStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn store(out: *mut *mut HpsgGrid, grid: SparseGrid) {
    *out = Box::into_raw(Box::new(HpsgGrid { grid }));
}

/// Default options: greedy strategy, `w_max = 1e-3`, `w_kink = 1`,
/// `p_max = 6`, `q_min = 1`, `q_max = 25`.
#[no_mangle]
pub extern "C" fn hpsg_default_options() -> HpsgBuildOptions {
    HpsgBuildOptions {
        strategy: HpsgStrategy::Greedy as i32,
        w_max: 1e-3,
        w_kink: 1.0,
        p_max: RefineConfig::DEFAULT_P_MAX,
        q_min: RefineConfig::DEFAULT_Q_MIN,
        q_max: RefineConfig::DEFAULT_Q_MAX,
    }
}

/// Builds an interpolant of `f` on the box `[lo, hi]` (arrays of length
/// `dim`). `f` is called from the calling thread only. `options` may be null
/// for defaults.
#[no_mangle]
pub unsafe extern "C" fn hpsg_build(
    dim: usize,
    lo: *const f64,
    hi: *const f64,
    options: *const HpsgBuildOptions,
    f: HpsgFunction,
    user_data: *mut c_void,
    out: *mut *mut HpsgGrid,
) -> HpsgStatus {
    guard(|| {
        if lo.is_null() || hi.is_null() || out.is_null() {
            return fail(HpsgStatus::NullPointer, "lo, hi and out must not be null");
        }
        let Some(f) = f else {
            return fail(HpsgStatus::NullPointer, "callback is null");
        };
        if dim == 0 {
            return fail(HpsgStatus::InvalidArgument, "dim must be positive");
        }
        let lo = std::slice::from_raw_parts(lo, dim).to_vec();
        let hi = std::slice::from_raw_parts(hi, dim).to_vec();
        let domain = match Domain::new(lo, hi) {
            Ok(d) => d,
            Err(e) => return fail(HpsgStatus::InvalidArgument, e.to_string()),
        };
        let cfg = match config_from(options, domain) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let eval = |x: &[f64]| -> Result<f64, String> {
            let mut v = f64::NAN;
            let rc = f(x.as_ptr(), x.len(), user_data, &mut v);
            if rc == 0 {
                Ok(v)
            } else {
                Err(format!("callback returned {rc}"))
            }
        };
        match build_serial(eval, &cfg) {
            Ok((grid, _)) => {
                store(out, grid);
                HpsgStatus::Ok
            }
            Err(e) => fail(refine_status(&e), e.to_string()),
        }
    })
}

/// Builds an interpolant of a built-in benchmark function (`curve2d`,
/// `genz-c`, `sobol-g` or `kink1d`) on its native domain.
#[no_mangle]
pub unsafe extern "C" fn hpsg_build_benchmark(
    function: *const c_char,
    dim: usize,
    options: *const HpsgBuildOptions,
    out: *mut *mut HpsgGrid,
) -> HpsgStatus {
    guard(|| {
        if out.is_null() {
            return fail(HpsgStatus::NullPointer, "out is null");
        }
        let name = match str_arg(function, "function") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let kind: FunctionKind = match name.parse() {
            Ok(k) => k,
            Err(e) => return fail(HpsgStatus::InvalidArgument, e),
        };
        let tf = match TestFunction::new(kind, dim) {
            Ok(t) => t,
            Err(e) => return fail(HpsgStatus::InvalidArgument, e.to_string()),
        };
        let cfg = match config_from(options, tf.domain().clone()) {
            Ok(c) => c,
            Err(s) => return s,
        };
        match build(|x: &[f64]| Ok::<_, Infallible>(tf.value(x)), &cfg) {
            Ok((grid, _)) => {
                store(out, grid);
                HpsgStatus::Ok
            }
            Err(e) => fail(refine_status(&e), e.to_string()),
        }
    })
}

/// Evaluates the interpolant at a point of length `dim` in the grid's domain.
#[no_mangle]
pub unsafe extern "C" fn hpsg_grid_evaluate(
    grid: *const HpsgGrid,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> HpsgStatus {
    hpsg_grid_evaluate_many(grid, x, 1, dim, out)
}

/// Evaluates `n` points stored row by row in `x` (`n * dim` values) and
/// writes `n` values to `out`.
#[no_mangle]
pub unsafe extern "C" fn hpsg_grid_evaluate_many(
    grid: *const HpsgGrid,
    x: *const f64,
    n: usize,
    dim: usize,
    out: *mut f64,
) -> HpsgStatus {
    guard(|| {
        if grid.is_null() || out.is_null() || (x.is_null() && n > 0) {
            return fail(HpsgStatus::NullPointer, "grid, x and out must not be null");
        }
        let grid = &(*grid).grid;
        if dim != grid.dim() {
            return fail(
                HpsgStatus::OutOfDomain,
                format!("grid has dimension {}, got {dim}", grid.dim()),
            );
        }
        if n == 0 {
            return HpsgStatus::Ok;
        }
        let xs = std::slice::from_raw_parts(x, n * dim);
        let out = std::slice::from_raw_parts_mut(out, n);
        for (i, (p, o)) in xs.chunks_exact(dim).zip(out.iter_mut()).enumerate() {
            match grid.evaluate(p) {
                Ok(v) => *o = v,
                Err(e) => return fail(grid_status(&e), format!("point {i}: {e}")),
            }
        }
        HpsgStatus::Ok
    })
}

/// Number of basis functions in the grid, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn hpsg_grid_num_nodes(grid: *const HpsgGrid) -> usize {
    if grid.is_null() {
        0
    } else {
        (*grid).grid.len()
    }
}

/// Dimension of the grid, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn hpsg_grid_dim(grid: *const HpsgGrid) -> usize {
    if grid.is_null() {
        0
    } else {
        (*grid).grid.dim()
    }
}

/// Writes the grid in the text dump format.
#[no_mangle]
pub unsafe extern "C" fn hpsg_grid_write_dump(grid: *const HpsgGrid, path: *const c_char) -> HpsgStatus {
    guard(|| {
        if grid.is_null() {
            return fail(HpsgStatus::NullPointer, "grid is null");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match (*grid).grid.write_dump(path) {
            Ok(()) => HpsgStatus::Ok,
            Err(e) => fail(grid_status(&e), e.to_string()),
        }
    })
}

/// Loads a grid written by [`hpsg_grid_write_dump`].
#[no_mangle]
pub unsafe extern "C" fn hpsg_grid_read_dump(path: *const c_char, out: *mut *mut HpsgGrid) -> HpsgStatus {
    guard(|| {
        if out.is_null() {
            return fail(HpsgStatus::NullPointer, "out is null");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match SparseGrid::read_dump(path) {
            Ok(grid) => {
                store(out, grid);
                HpsgStatus::Ok
            }
            Err(e) => fail(grid_status(&e), e.to_string()),
        }
    })
}

/// Releases a grid. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hpsg_grid_free(grid: *mut HpsgGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Derivative jump estimate at `center` from `n` samples `(x[i], f[i])`,
/// which need not be sorted. Returns `NotAvailable` when no stencil can be
/// formed around `center`.
#[no_mangle]
pub unsafe extern "C" fn hpsg_jump_estimate(
    x: *const f64,
    f: *const f64,
    n: usize,
    center: f64,
    out: *mut f64,
) -> HpsgStatus {
    guard(|| {
        if x.is_null() || f.is_null() || out.is_null() {
            return fail(HpsgStatus::NullPointer, "x, f and out must not be null");
        }
        let xs = std::slice::from_raw_parts(x, n);
        let fs = std::slice::from_raw_parts(f, n);
        if xs.iter().chain(fs).any(|v| !v.is_finite()) || !center.is_finite() {
            return fail(HpsgStatus::InvalidArgument, "samples must be finite");
        }
        let samples: Vec<(f64, f64)> = xs.iter().copied().zip(fs.iter().copied()).collect();
        match estimate_from_samples(&samples, center) {
            Some(j) => {
                *out = j.value;
                HpsgStatus::Ok
            }
            None => fail(
                HpsgStatus::NotAvailable,
                format!("no stencil around {center} from {n} samples"),
            ),
        }
    })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from this thread.
#[no_mangle]
pub extern "C" fn hpsg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hpsg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
