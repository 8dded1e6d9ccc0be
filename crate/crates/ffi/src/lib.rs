//! C interface to `warpconv`.
//!
//! Objects are opaque handles created by `wc_*_new` style constructors and released with the
//! matching `wc_*_free`. Every fallible function returns a [`WcStatus`]; on failure the message
//! is kept per thread and read back with [`wc_last_error_message`]. Results are written through
//! out-pointers, which are left untouched on failure.
//!
//! Skew matrices are passed as `dims * dims` row-major arrays of doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use warpconv::grid::{domain_vector, q_generator, GridSpace, GridState, SkewMatrix};
use warpconv::operator::GridOperator;
use warpconv::qm::{self, DeformedHamiltonian, VOrdering};
use warpconv::warp;
use warpconv::{snapshot, Error};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A numerical contract failed (non-convergence, infeasible bound, tail leakage...).
    Numerical = 3,
    Io = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

/// Opaque grid handle.
pub struct WcGrid(Arc<GridSpace>);

/// Opaque state handle.
pub struct WcState(GridState);

/// Opaque handle of a deformed Hamiltonian H₀ + V.
pub struct WcHamiltonian(DeformedHamiltonian);

/// Undeformed operators accepted by [`wc_warp_spectral`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WcOperatorKind {
    /// P_j with j = `index`.
    Momentum = 0,
    /// X_j with j = `index`.
    Coordinate = 1,
    /// P²/2m with m = `mass`.
    FreeHamiltonian = 2,
}

/// Fitted coefficients of ‖VΦ‖ ≤ a‖H₀Φ‖ + b‖Φ‖.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WcBoundFit {
    pub a: f64,
    pub b: f64,
    pub max_violation: f64,
    pub samples: usize,
    pub degenerate: usize,
    pub feasible: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WcStatus {
    match e {
        Error::NonConvergent { .. }
        | Error::QuadratureRange { .. }
        | Error::TailMass { .. }
        | Error::Infeasible { .. }
        | Error::NotHermitian(_)
        | Error::AllSamplesDegenerate
        | Error::StepUnderflow(_)
        | Error::BoundaryContaminated(_) => WcStatus::Numerical,
        Error::Io(_) => WcStatus::Io,
        _ => WcStatus::InvalidArgument,
    }
}

struct Fail(WcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(WcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(WcStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any failure or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> WcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WcStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            WcStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<T>(p: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn skew(entries: *const f64, dims: usize) -> Result<SkewMatrix, Fail> {
    let e = slice(entries, dims * dims, "skew")?;
    Ok(SkewMatrix::new(dims, e.to_vec())?)
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not UTF-8"))?;
    Ok(Path::new(s))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failure on this thread, or null. Valid until the next call that fails.
#[no_mangle]
pub extern "C" fn wc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn wc_clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Sign and ordering conventions as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wc_convention() -> *const c_char {
    static TAG: std::sync::OnceLock<CString> = std::sync::OnceLock::new();
    TAG.get_or_init(|| CString::new(warpconv::grid::CONVENTION_TAG).expect("no nul")).as_ptr()
}

/// Grid [−L, L)^dims with `points` nodes per axis shifted by `offset`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_grid_new(
    dims: usize,
    points: usize,
    half_width: f64,
    offset: f64,
    out: *mut *mut WcGrid,
) -> WcStatus {
    guard(|| {
        let g = GridSpace::new(dims, points, half_width, offset)?;
        self::out(out, boxed(WcGrid(Arc::new(g))), "out")
    })
}

/// # Safety
/// `grid` must come from [`wc_grid_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn wc_grid_free(grid: *mut WcGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of nodes, or 0 for a null grid.
///
/// # Safety
/// `grid` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn wc_grid_len(grid: *const WcGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// # Safety
/// `grid` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn wc_grid_dims(grid: *const WcGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.dims)
}

/// Normalized x^k e^{−x²/2} sampled on the grid; `k` holds one exponent per axis.
///
/// # Safety
/// `grid` must be live, `k` must hold `k_len` integers and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_state_domain_vector(
    grid: *const WcGrid,
    k: *const i32,
    k_len: usize,
    out: *mut *mut WcState,
) -> WcStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        let k = slice(k, k_len, "k")?;
        let s = domain_vector(&g.0, k)?;
        self::out(out, boxed(WcState(s)), "out")
    })
}

/// State from `len` amplitudes split into real and imaginary arrays.
///
/// # Safety
/// `re` and `im` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wc_state_from_amplitudes(
    grid: *const WcGrid,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut WcState,
) -> WcStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        let re = slice(re, len, "re")?;
        let im = slice(im, len, "im")?;
        let amps = re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect();
        let s = GridState::from_amplitudes(&g.0, amps)?;
        self::out(out, boxed(WcState(s)), "out")
    })
}

/// Copies the amplitudes into `re` and `im`, which must hold `len` = grid length doubles.
///
/// # Safety
/// `re` and `im` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn wc_state_amplitudes(
    state: *const WcState,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> WcStatus {
    guard(|| {
        let s = deref(state, "state")?;
        if len != s.0.amplitudes.len() {
            return Err(Error::DimensionMismatch { expected: s.0.amplitudes.len(), found: len }.into());
        }
        if re.is_null() || im.is_null() {
            return Err(null("re or im"));
        }
        for (k, c) in s.0.amplitudes.iter().enumerate() {
            re.add(k).write(c.re);
            im.add(k).write(c.im);
        }
        Ok(())
    })
}

/// # Safety
/// `state` must be live and `norm` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_state_norm(state: *const WcState, norm: *mut f64) -> WcStatus {
    guard(|| out(norm, deref(state, "state")?.0.norm(), "norm"))
}

/// ‖a − b‖.
///
/// # Safety
/// Both states must be live and `dist` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_state_distance(a: *const WcState, b: *const WcState, dist: *mut f64) -> WcStatus {
    guard(|| {
        let d = deref(a, "a")?.0.distance(&deref(b, "b")?.0)?;
        out(dist, d, "dist")
    })
}

/// # Safety
/// `state` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn wc_state_free(state: *mut WcState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Writes a snapshot; JSON for a `.json` path, binary otherwise.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wc_state_save(state: *const WcState, path: *const c_char) -> WcStatus {
    guard(|| Ok(snapshot::save(&deref(state, "state")?.0, self::path(path)?)?))
}

/// Reads a snapshot written by [`wc_state_save`]. The grid is rebuilt from the snapshot header.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_state_load(path: *const c_char, out: *mut *mut WcState) -> WcStatus {
    guard(|| {
        let s = snapshot::load(self::path(path)?)?;
        self::out(out, boxed(WcState(s)), "out")
    })
}

/// H_B = H₀ + V for the skew matrix B and Q = X/|X|^exponent, symmetric ordering.
///
/// # Safety
/// `skew` must hold dims² doubles and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_hamiltonian_new(
    grid: *const WcGrid,
    skew: *const f64,
    exponent: f64,
    mass: f64,
    out: *mut *mut WcHamiltonian,
) -> WcStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        let b = self::skew(skew, g.0.dims)?;
        let h = qm::deformed_hamiltonian(&g.0, &b, exponent, mass, VOrdering::Symmetric)?;
        self::out(out, boxed(WcHamiltonian(h)), "out")
    })
}

/// # Safety
/// `h` must come from [`wc_hamiltonian_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn wc_hamiltonian_free(h: *mut WcHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// Handles must be live and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_hamiltonian_apply(
    h: *const WcHamiltonian,
    state: *const WcState,
    out: *mut *mut WcState,
) -> WcStatus {
    guard(|| {
        let r = deref(h, "h")?.0.apply(&deref(state, "state")?.0)?;
        self::out(out, boxed(WcState(r)), "out")
    })
}

/// Relative residual ‖H_BΦ − (1/2m) Σ_j (P_B^j)²Φ‖/‖Φ‖.
///
/// # Safety
/// Handles must be live and `residual` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_theorem_d1_check(
    h: *const WcHamiltonian,
    state: *const WcState,
    residual: *mut f64,
) -> WcStatus {
    guard(|| {
        let r = qm::theorem_d1_check(&deref(h, "h")?.0, &deref(state, "state")?.0)?;
        out(residual, r, "residual")
    })
}

/// Fits ‖VΦ‖ ≤ a‖H₀Φ‖ + b‖Φ‖ over the default sample set drawn with `seed`.
///
/// # Safety
/// `h` must be live and `fit` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_bound_fit(
    h: *const WcHamiltonian,
    seed: u64,
    b_cap: f64,
    fit: *mut WcBoundFit,
) -> WcStatus {
    guard(|| {
        let h = &deref(h, "h")?.0;
        let samples = qm::default_sample_set(&h.h0.space, seed)?;
        let f = qm::fit_relative_bound(&h.v, &h.h0, &samples, b_cap)?;
        let r = WcBoundFit {
            a: f.a,
            b: f.b,
            max_violation: f.max_violation,
            samples: f.samples.len(),
            degenerate: f.degenerate.len(),
            feasible: f.feasible,
        };
        out(fit, r, "fit")
    })
}

/// Applies the warped convolution of the chosen operator, deformed by `skew` with
/// Q = X/|X|^exponent, to `state` using the exact spectral evaluator.
///
/// # Safety
/// Handles must be live, `skew` must hold dims² doubles and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_warp_spectral(
    kind: WcOperatorKind,
    index: usize,
    mass: f64,
    skew: *const f64,
    exponent: f64,
    state: *const WcState,
    out: *mut *mut WcState,
) -> WcStatus {
    guard(|| {
        let phi = &deref(state, "state")?.0;
        let space = &phi.space;
        let needs_axis = matches!(kind, WcOperatorKind::Momentum | WcOperatorKind::Coordinate);
        if needs_axis && index >= space.dims {
            return Err(invalid(format!("axis {index} out of range for {} dimensions", space.dims)));
        }
        let a = match kind {
            WcOperatorKind::Momentum => GridOperator::momentum(space, index),
            WcOperatorKind::Coordinate => GridOperator::coordinate(space, index),
            WcOperatorKind::FreeHamiltonian => GridOperator::free_hamiltonian(space, mass),
        };
        let b = self::skew(skew, space.dims)?;
        let q = q_generator(space, exponent)?;
        let r = warp::warp_spectral(&a, &q, &b, phi)?;
        self::out(out, boxed(WcState(r)), "out")
    })
}
