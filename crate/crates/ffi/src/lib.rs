//! C interface to `tangent-mor`.
//!
//! Objects are opaque handles created by `tm_*_new`/`tm_*_generate`/
//! `tm_reduce` and released with the matching `tm_*_free`. Every fallible
//! call returns a `TmStatus`; on failure `tm_last_error` describes the
//! problem. Complex matrices are exchanged as column-major arrays of
//! `TmComplex`. Handles may be shared between threads for read-only calls.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use num_complex::Complex64;
use tangent_mor::adaptive::{run_abtl, AbtlOptions};
use tangent_mor::evaluation::{hinf_estimate, log_grid};
use tangent_mor::linalg::sparse::CscMatrix;
use tangent_mor::linalg::{CMat, RMat};
use tangent_mor::problems::{
    generate_fdm, load_matrix_market, save_reduced, FdmSpec, LoadOptions, ModelKind, ReducedMetadata, SavedModel,
    SystemPaths,
};
use tangent_mor::system::{FirstOrderSystem, ReducedModel, TransferFunction};
use tangent_mor::MorError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    SingularShift = 4,
    Breakdown = 5,
    Deflation = 6,
    /// other failures of the numerics
    Numerical = 7,
    Io = 8,
    Parse = 9,
    Unsupported = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TmComplex {
    pub re: f64,
    pub im: f64,
}

/// One row of the reduction history.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TmIterationRecord {
    pub iteration: usize,
    pub sigma: TmComplex,
    pub mu: TmComplex,
    pub right_residual: f64,
    pub left_residual: f64,
    pub candidates: usize,
    pub biorthogonality: f64,
}

/// Sparse first-order system `(A, B, C)`.
pub struct TmSystem {
    inner: FirstOrderSystem,
}

/// Reduced model together with the shifts, directions and history that
/// produced it.
pub struct TmReducedModel {
    model: ReducedModel,
    metadata: ReducedMetadata,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &MorError) -> TmStatus {
    match err {
        MorError::SingularShift { .. } => TmStatus::SingularShift,
        MorError::Breakdown { .. } => TmStatus::Breakdown,
        MorError::Deflation { .. } => TmStatus::Deflation,
        MorError::DimensionMismatch(_) => TmStatus::DimensionMismatch,
        MorError::InvalidArgument(_) => TmStatus::InvalidArgument,
        MorError::Parse { .. } | MorError::Json { .. } => TmStatus::Parse,
        MorError::Unsupported(_) => TmStatus::Unsupported,
        MorError::Io { .. } => TmStatus::Io,
        e if e.is_numerical() => TmStatus::Numerical,
        _ => TmStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (TmStatus, String)>) -> TmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TmStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            TmStatus::Panic
        }
    }
}

fn mor(e: MorError) -> (TmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (TmStatus, String) {
    (TmStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (TmStatus, String) {
    (TmStatus::InvalidArgument, msg.into())
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<Option<PathBuf>, (TmStatus, String)> {
    if p.is_null() {
        return Ok(None);
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))?;
    Ok(Some(PathBuf::from(s)))
}

unsafe fn write_matrix(m: &CMat, out: *mut TmComplex) {
    for (k, z) in m.iter().enumerate() {
        *out.add(k) = TmComplex { re: z.re, im: z.im };
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next `tm_*` call on the same thread.
#[no_mangle]
pub extern "C" fn tm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Convection-diffusion benchmark with `n0 * n0` unknowns and seeded
/// uniform `B` (n×p), `C` (p×n).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn tm_system_generate_fdm(n0: usize, p: usize, seed: u64, out: *mut *mut TmSystem) -> TmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = generate_fdm(&FdmSpec::new(n0, p, seed)).map_err(mor)?;
        *out = Box::into_raw(Box::new(TmSystem { inner }));
        Ok(())
    })
}

/// System from column-major dense arrays: `a` n×n, `b` n×p, `c` p×n. Zero
/// entries of `a` are not stored.
///
/// # Safety
/// The arrays must hold `n*n`, `n*p` and `p*n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tm_system_new_dense(
    n: usize,
    p: usize,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    out: *mut *mut TmSystem,
) -> TmStatus {
    guard(|| {
        if a.is_null() || b.is_null() || c.is_null() || out.is_null() {
            return Err(null("matrix or output pointer"));
        }
        if n == 0 || p == 0 {
            return Err(invalid("n and p must be positive"));
        }
        let a = std::slice::from_raw_parts(a, n * n);
        let triplets: Vec<_> = (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .filter(|&(i, j)| a[j * n + i] != 0.0)
            .map(|(i, j)| (i, j, a[j * n + i]))
            .collect();
        let b = RMat::from_column_slice(n, p, std::slice::from_raw_parts(b, n * p));
        let c = RMat::from_column_slice(p, n, std::slice::from_raw_parts(c, p * n));
        let inner = FirstOrderSystem::new(CscMatrix::from_triplets(n, n, &triplets), b, c).map_err(mor)?;
        *out = Box::into_raw(Box::new(TmSystem { inner }));
        Ok(())
    })
}

/// Reads `A` (and optionally `B`, `C`) from Matrix Market files. NULL `b`
/// or `c` are replaced by seeded random matrices with `p` ports.
///
/// # Safety
/// Paths must be NUL-terminated strings or NULL; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tm_system_load(
    a: *const c_char,
    b: *const c_char,
    c: *const c_char,
    p: usize,
    seed: u64,
    out: *mut *mut TmSystem,
) -> TmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = path_arg(a, "a")?.ok_or_else(|| null("a"))?;
        let opts = LoadOptions {
            b: path_arg(b, "b")?,
            c: path_arg(c, "c")?,
            p: (p > 0).then_some(p),
            seed,
            ..Default::default()
        };
        let bundle = load_matrix_market(&SystemPaths::FirstOrder { a }, &opts).map_err(mor)?;
        let inner = bundle.first_order().cloned().ok_or_else(|| invalid("not a first-order system"))?;
        *out = Box::into_raw(Box::new(TmSystem { inner }));
        Ok(())
    })
}

/// # Safety
/// `sys` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tm_system_free(sys: *mut TmSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// State dimension, or 0 for a NULL handle.
///
/// # Safety
/// `sys` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tm_system_order(sys: *const TmSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inner.n())
}

/// Number of inputs (= outputs), or 0 for a NULL handle.
///
/// # Safety
/// `sys` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tm_system_ports(sys: *const TmSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inner.p())
}

/// `C (omega I - A)^{-1} B` written column-major into `out` (p*p entries).
///
/// # Safety
/// `sys` must be live and `out` must hold `p*p` values.
#[no_mangle]
pub unsafe extern "C" fn tm_system_transfer(sys: *const TmSystem, omega: TmComplex, out: *mut TmComplex) -> TmStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("sys"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let h = sys.inner.transfer(Complex64::new(omega.re, omega.im)).map_err(mor)?;
        write_matrix(&h, out);
        Ok(())
    })
}

/// Adaptive reduction with block width `s`, at most `m_max` blocks and
/// relative residual tolerance `tol` (pass 0 or a negative value for the
/// default).
///
/// # Safety
/// `sys` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tm_reduce(
    sys: *const TmSystem,
    s: usize,
    m_max: usize,
    tol: f64,
    out: *mut *mut TmReducedModel,
) -> TmStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("sys"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut opts = AbtlOptions::new(s, m_max);
        if tol > 0.0 {
            opts.tol = tol;
        }
        let run = run_abtl(&sys.inner, &opts).map_err(mor)?;
        let metadata = ReducedMetadata::from_output(&run, ModelKind::FirstOrder, run.model.order());
        *out = Box::into_raw(Box::new(TmReducedModel {
            model: run.model,
            metadata,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tm_model_free(model: *mut TmReducedModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Reduced order `m * s`, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tm_model_order(model: *const TmReducedModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.order())
}

/// Number of history records, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tm_model_history_len(model: *const TmReducedModel) -> usize {
    model.as_ref().map_or(0, |m| m.metadata.history.len())
}

/// 1 if the residual tolerance was met, 0 otherwise.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tm_model_converged(model: *const TmReducedModel) -> i32 {
    model.as_ref().map_or(0, |m| i32::from(m.metadata.converged))
}

/// # Safety
/// `model` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tm_model_history(
    model: *const TmReducedModel,
    index: usize,
    out: *mut TmIterationRecord,
) -> TmStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = m
            .metadata
            .history
            .get(index)
            .ok_or_else(|| invalid(format!("history index {index} out of range")))?;
        *out = TmIterationRecord {
            iteration: r.iteration,
            sigma: TmComplex {
                re: r.sigma.re,
                im: r.sigma.im,
            },
            mu: TmComplex {
                re: r.mu.re,
                im: r.mu.im,
            },
            right_residual: r.right_residual,
            left_residual: r.left_residual,
            candidates: r.candidates,
            biorthogonality: r.biorthogonality,
        };
        Ok(())
    })
}

/// Reduced transfer function at `omega`, column-major p×p.
///
/// # Safety
/// `model` must be live and `out` must hold `p*p` values.
#[no_mangle]
pub unsafe extern "C" fn tm_model_transfer(
    model: *const TmReducedModel,
    omega: TmComplex,
    out: *mut TmComplex,
) -> TmStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let h = m.model.transfer(Complex64::new(omega.re, omega.im)).map_err(mor)?;
        write_matrix(&h, out);
        Ok(())
    })
}

/// Writes the model as Matrix Market files plus `metadata.json` into `dir`.
///
/// # Safety
/// `model` must be live and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn tm_model_save(model: *const TmReducedModel, dir: *const c_char) -> TmStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let dir = path_arg(dir, "dir")?.ok_or_else(|| null("dir"))?;
        save_reduced(dir, &SavedModel::FirstOrder(m.model.clone()), &m.metadata).map_err(mor)
    })
}

/// Largest `||H(jw) - H_m(jw)||_2` over `count` log-spaced `w` in
/// `[omega_min, omega_max]`.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tm_sampled_hinf_error(
    sys: *const TmSystem,
    model: *const TmReducedModel,
    omega_min: f64,
    omega_max: f64,
    count: usize,
    out: *mut f64,
) -> TmStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("sys"))?;
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if sys.inner.p() != m.model.p() {
            return Err((TmStatus::DimensionMismatch, "port counts differ".into()));
        }
        let grid = log_grid(omega_min, omega_max, count).map_err(mor)?;
        *out = hinf_estimate(&sys.inner, &m.model, &grid);
        Ok(())
    })
}
