//! C ABI over `convexdual`.
//!
//! Conventions:
//! * Every fallible call returns a [`CdStatus`]; results come back through out-pointers.
//! * On failure, [`cd_last_error`] describes the most recent error on the calling thread.
//! * Handles are opaque and owned by the caller; release them with the matching `*_free`.
//! * Strings returned as `char *` are owned by the caller and released with [`cd_string_free`].
//! * Matrices cross the boundary as row-major `double` arrays.
//! * Panics never unwind into C; they surface as [`CdStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use convexdual::cert::{self, CertifyOptions, DualityCertificate, Verdict};
use convexdual::control::{self, Clock, LtiSystem, StabilizationResult, SynthesisOptions};
use convexdual::corpus::{self, canonical_json, InstanceFile};
use convexdual::Error;
use nalgebra::DMatrix;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// Bad argument value, dimension or string encoding.
    InvalidArgument = 2,
    /// Malformed JSON.
    Parse = 3,
    /// Well-formed JSON that does not match the instance schema.
    SchemaMismatch = 4,
    Io = 5,
    /// The instance kind has no lossless change of variables.
    NoLosslessMap = 6,
    NotStabilizable = 7,
    /// Solver or numerical breakdown.
    Numerical = 8,
    /// Defect or caught panic.
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdVerdict {
    StrongDualityVerified = 0,
    WeakOnly = 1,
    Inconclusive = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdClock {
    ContinuousTime = 0,
    DiscreteTime = 1,
}

/// A loaded instance file.
pub struct CdInstance(InstanceFile);

/// A strong-duality certificate.
pub struct CdCertificate(DualityCertificate);

/// A synthesized stabilizing state feedback.
pub struct CdStabilization {
    result: StabilizationResult,
    clock: Clock,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CdStatus {
    match e {
        Error::Parse { .. } => CdStatus::Parse,
        Error::SchemaMismatch(_) => CdStatus::SchemaMismatch,
        Error::Io(_) => CdStatus::Io,
        Error::NoLosslessMap(_) => CdStatus::NoLosslessMap,
        Error::NotStabilizable { .. } => CdStatus::NotStabilizable,
        Error::SolverFailure(_)
        | Error::ConvergenceFailure
        | Error::SingularP
        | Error::SamplingFailed => CdStatus::Numerical,
        Error::Internal(_) => CdStatus::Internal,
        _ => CdStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, records any error and converts it (or a panic) into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CdStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            CdStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_last_error(&format!("invalid argument: {msg}"));
            CdStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic");
            CdStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn matrix_arg(
    p: *const f64,
    rows: usize,
    cols: usize,
    what: &'static str,
) -> Result<DMatrix<f64>, Failure> {
    if rows == 0 || cols == 0 {
        return Err(Failure::Arg(format!("{what} must be at least 1x1")));
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Failure::Arg(format!("{what} size overflows")))?;
    let data = std::slice::from_raw_parts(p, len);
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::Arg("string contains NUL".into()))
}

/// Copies a row-major matrix into a caller buffer of `len` doubles.
unsafe fn write_matrix(m: &DMatrix<f64>, out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    let need = m.nrows() * m.ncols();
    if len < need {
        return Err(Failure::Arg(format!(
            "buffer holds {len} values, {need} needed"
        )));
    }
    let buf = std::slice::from_raw_parts_mut(out, need);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf[i * m.ncols() + j] = m[(i, j)];
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// errors, strings, version

/// Message of the last failed call on this thread, or NULL if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// instances

/// Loads a built-in corpus instance by name.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cd_instance_builtin(
    name: *const c_char,
    out: *mut *mut CdInstance,
) -> CdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inst = corpus::builtin(str_arg(name, "name")?)?;
        *out = Box::into_raw(Box::new(CdInstance(inst)));
        Ok(())
    })
}

/// Loads an instance file from disk.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cd_instance_load(
    path: *const c_char,
    out: *mut *mut CdInstance,
) -> CdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inst = corpus::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(CdInstance(inst)));
        Ok(())
    })
}

/// Parses an instance from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cd_instance_from_json(
    json: *const c_char,
    out: *mut *mut CdInstance,
) -> CdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inst = InstanceFile::from_json_str(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(CdInstance(inst)));
        Ok(())
    })
}

/// Canonical JSON text of an instance. Free with [`cd_string_free`].
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cd_instance_to_json(
    inst: *const CdInstance,
    out: *mut *mut c_char,
) -> CdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = owned_string(handle(inst, "inst")?.0.to_canonical_string()?)?;
        Ok(())
    })
}

/// # Safety
/// `inst` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cd_instance_free(inst: *mut CdInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

// ---------------------------------------------------------------------------
// certificates

/// Solves the convexified problem of `inst` and certifies strong duality.
///
/// A certificate is produced even when the verdict is not verified; inspect it
/// with [`cd_certificate_verdict`]. Fails with `NoLosslessMap` for output-feedback
/// instances.
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cd_certify(
    inst: *const CdInstance,
    tol_gap: f64,
    tol_feas: f64,
    samples: usize,
    seed: u64,
    out: *mut *mut CdCertificate,
) -> CdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inst = handle(inst, "inst")?;
        if !(tol_gap > 0.0 && tol_feas > 0.0 && tol_gap.is_finite() && tol_feas.is_finite()) {
            return Err(Failure::Arg(
                "tolerances must be positive and finite".into(),
            ));
        }
        let c = inst.0.change_of_variables()?;
        let cert = cert::certify(
            c.source(),
            &c,
            &CertifyOptions {
                tol_gap,
                tol_feas,
                samples,
                seed,
            },
        );
        *out = Box::into_raw(Box::new(CdCertificate(cert)));
        Ok(())
    })
}

/// Default tolerances and sampling for [`cd_certify`].
///
/// # Safety
/// Each out-pointer must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn cd_certify_defaults(
    tol_gap: *mut f64,
    tol_feas: *mut f64,
    samples: *mut usize,
    seed: *mut u64,
) {
    let d = CertifyOptions::default();
    if let Some(p) = tol_gap.as_mut() {
        *p = d.tol_gap;
    }
    if let Some(p) = tol_feas.as_mut() {
        *p = d.tol_feas;
    }
    if let Some(p) = samples.as_mut() {
        *p = d.samples;
    }
    if let Some(p) = seed.as_mut() {
        *p = d.seed;
    }
}

/// Primal value; NaN for a NULL handle.
///
/// # Safety
/// `cert` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cd_certificate_primal_value(cert: *const CdCertificate) -> f64 {
    cert.as_ref().map_or(f64::NAN, |c| c.0.primal_value)
}

/// Dual value; NaN for a NULL handle.
///
/// # Safety
/// `cert` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cd_certificate_dual_value(cert: *const CdCertificate) -> f64 {
    cert.as_ref().map_or(f64::NAN, |c| c.0.dual_value)
}

/// Duality gap; NaN for a NULL handle.
///
/// # Safety
/// `cert` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cd_certificate_gap(cert: *const CdCertificate) -> f64 {
    cert.as_ref().map_or(f64::NAN, |c| c.0.gap)
}

/// Strict-feasibility margin; NaN for a NULL handle.
///
/// # Safety
/// `cert` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cd_certificate_slater_margin(cert: *const CdCertificate) -> f64 {
    cert.as_ref().map_or(f64::NAN, |c| c.0.slater_margin)
}

/// Verdict; `Inconclusive` for a NULL handle.
///
/// # Safety
/// `cert` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cd_certificate_verdict(cert: *const CdCertificate) -> CdVerdict {
    match cert.as_ref().map(|c| c.0.verdict) {
        Some(Verdict::StrongDualityVerified) => CdVerdict::StrongDualityVerified,
        Some(Verdict::WeakOnly) => CdVerdict::WeakOnly,
        _ => CdVerdict::Inconclusive,
    }
}

/// Canonical JSON of the certificate, byte-identical to the CLI's `--format json`
/// output of `certify`. Free with [`cd_string_free`].
///
/// # Safety
/// `cert` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cd_certificate_to_json(
    cert: *const CdCertificate,
    out: *mut *mut c_char,
) -> CdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = owned_string(canonical_json(&handle(cert, "cert")?.0.to_json()))?;
        Ok(())
    })
}

/// # Safety
/// `cert` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cd_certificate_free(cert: *mut CdCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

// ---------------------------------------------------------------------------
// stabilization

/// Synthesizes a stabilizing state feedback `u = F x` for `(A, B)`.
///
/// `a` is `n×n` and `b` is `n×m`, both row-major. `clock` is a [`CdClock`]
/// value; anything else is rejected. A non-positive `epsilon`
/// selects the default margin. Fails with `NotStabilizable` when no
/// certificate is found.
///
/// # Safety
/// `a` must hold `n*n` doubles, `b` must hold `n*m` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cd_synthesize(
    a: *const f64,
    b: *const f64,
    n: usize,
    m: usize,
    clock: u32,
    epsilon: f64,
    out: *mut *mut CdStabilization,
) -> CdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let clock = match clock {
            c if c == CdClock::ContinuousTime as u32 => Clock::ContinuousTime,
            c if c == CdClock::DiscreteTime as u32 => Clock::DiscreteTime,
            c => return Err(Failure::Arg(format!("unknown clock {c}"))),
        };
        let sys = LtiSystem::new(matrix_arg(a, n, n, "a")?, matrix_arg(b, n, m, "b")?, clock)?;
        if epsilon.is_nan() {
            return Err(Failure::Arg("epsilon is NaN".into()));
        }
        let opts = SynthesisOptions {
            epsilon: (epsilon > 0.0).then_some(epsilon),
            ..SynthesisOptions::default()
        };
        let result = control::synthesize(&sys, &opts)?;
        *out = Box::into_raw(Box::new(CdStabilization { result, clock }));
        Ok(())
    })
}

/// Synthesizes a feedback for a stabilization instance (`ct_stabilization` or
/// `dt_stabilization`), honoring its stored `epsilon`.
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cd_instance_synthesize(
    inst: *const CdInstance,
    out: *mut *mut CdStabilization,
) -> CdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inst = &handle(inst, "inst")?.0;
        match inst.kind {
            corpus::InstanceKind::CtStabilization | corpus::InstanceKind::DtStabilization => {}
            corpus::InstanceKind::StaticOutputFeedback => {
                return Err(Error::NoLosslessMap(inst.kind.name().into()).into())
            }
            corpus::InstanceKind::ScalarBmi => {
                return Err(Failure::Arg(
                    "synthesis needs a stabilization instance".into(),
                ))
            }
        }
        let sys = inst.system()?;
        let opts = SynthesisOptions {
            epsilon: inst.data.epsilon,
            ..SynthesisOptions::default()
        };
        let result = control::synthesize(&sys, &opts)?;
        *out = Box::into_raw(Box::new(CdStabilization {
            result,
            clock: sys.clock(),
        }));
        Ok(())
    })
}

/// Number of inputs `m` (rows of `F`); 0 for a NULL handle.
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cd_stabilization_inputs(res: *const CdStabilization) -> usize {
    res.as_ref().map_or(0, |r| r.result.f.nrows())
}

/// Number of states `n` (columns of `F`); 0 for a NULL handle.
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cd_stabilization_states(res: *const CdStabilization) -> usize {
    res.as_ref().map_or(0, |r| r.result.f.ncols())
}

/// Copies the `m×n` gain `F` row-major into `out`, which holds `len` doubles.
///
/// # Safety
/// `res` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cd_stabilization_gain(
    res: *const CdStabilization,
    out: *mut f64,
    len: usize,
) -> CdStatus {
    guard(|| write_matrix(&handle(res, "res")?.result.f, out, len))
}

/// Copies the `n×n` Lyapunov matrix `P` row-major into `out`, which holds `len` doubles.
///
/// # Safety
/// `res` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cd_stabilization_lyapunov(
    res: *const CdStabilization,
    out: *mut f64,
    len: usize,
) -> CdStatus {
    guard(|| write_matrix(handle(res, "res")?.result.p.as_matrix(), out, len))
}

/// `max Re λ(A + BF)` in continuous time, `max |λ(A + BF)|` in discrete time;
/// NaN for a NULL handle.
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cd_stabilization_measure(res: *const CdStabilization) -> f64 {
    res.as_ref()
        .map_or(f64::NAN, |r| r.result.stability_measure(r.clock))
}

/// The `ε` at which the certificate was found; NaN for a NULL handle.
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cd_stabilization_epsilon(res: *const CdStabilization) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.result.epsilon)
}

/// Copies the strong-duality certificate of the underlying margin program.
///
/// # Safety
/// `res` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cd_stabilization_certificate(
    res: *const CdStabilization,
    out: *mut *mut CdCertificate,
) -> CdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cert = handle(res, "res")?.result.certificate.clone();
        *out = Box::into_raw(Box::new(CdCertificate(cert)));
        Ok(())
    })
}

/// # Safety
/// `res` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cd_stabilization_free(res: *mut CdStabilization) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
