//! C interface to argoskit.
//!
//! Every function returns an [`ArgosStatus`]; on failure a message is kept
//! per thread and can be fetched with [`argos_last_error`]. Objects are
//! opaque handles released with their `_free` function. Strings returned by
//! the library are released with [`argos_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use argoskit::bayes::BayesConfig;
use argoskit::diagnostics::analyze_affine_modes;
use argoskit::ode::{
    add_noise, builtin_system, sample_initial_condition, simulate, NoiseSpec, Snr,
};
use argoskit::pipeline::{compare_truth, discover, DiscoverConfig, DiscoveredModel};
use argoskit::seed::{derive, Stream};
use argoskit::trajectory::Trajectory;
use argoskit::Error;
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgosStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownSystem = 3,
    DimensionMismatch = 4,
    IntegrationFailure = 5,
    Numerical = 6,
    Io = 7,
    Parse = 8,
    OutOfRange = 9,
    Panic = 10,
}

impl From<&Error> for ArgosStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::UnknownSystem { .. } => ArgosStatus::UnknownSystem,
            Error::InvalidArgument(_)
            | Error::InvalidWindow { .. }
            | Error::TooFewSamples { .. }
            | Error::TooFewDraws { .. } => ArgosStatus::InvalidArgument,
            Error::DimensionMismatch { .. } => ArgosStatus::DimensionMismatch,
            Error::IntegrationFailure { .. } => ArgosStatus::IntegrationFailure,
            Error::EmptySupport
            | Error::NonConvergence { .. }
            | Error::DivergenceRate { .. }
            | Error::DegeneratePosterior(_)
            | Error::SingularMatrix { .. } => ArgosStatus::Numerical,
            Error::Io { .. } => ArgosStatus::Io,
            Error::Parse(_) | Error::Csv(_) | Error::Json(_) => ArgosStatus::Parse,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: ArgosStatus, msg: impl Into<String>) -> ArgosStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), ArgosStatus>) -> ArgosStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ArgosStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(ArgosStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, ArgosStatus>;
}

impl<T> OrStatus<T> for argoskit::Result<T> {
    fn or_status(self) -> Result<T, ArgosStatus> {
        self.map_err(|e| fail(ArgosStatus::from(&e), e.to_string()))
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), ArgosStatus> {
    if p.is_null() {
        Err(fail(ArgosStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, ArgosStatus> {
    non_null(p, what)?;
    CStr::from_ptr(p).to_str().map_err(|_| {
        fail(
            ArgosStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )
    })
}

fn to_c_string(s: String) -> Result<*mut c_char, ArgosStatus> {
    CString::new(s).map(CString::into_raw).map_err(|_| {
        fail(
            ArgosStatus::InvalidArgument,
            "string contains an interior NUL",
        )
    })
}

/// Opaque trajectory handle.
pub struct ArgosTrajectory(Trajectory);

/// Opaque identified-model handle.
pub struct ArgosModel(DiscoveredModel);

/// Options for [`argos_discover`]; start from [`argos_discover_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ArgosDiscoverOptions {
    pub degree: u32,
    pub trig: bool,
    pub chains: usize,
    pub iters: usize,
    pub warmup: usize,
    pub ci_level: f64,
    pub seed: u64,
}

/// Posterior summary of one retained term.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArgosTerm {
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Message of the last failure on this thread, or null. Free with
/// [`argos_string_free`].
#[no_mangle]
pub extern "C" fn argos_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        Some(m) => CString::new(m.replace('\0', " "))
            .map(CString::into_raw)
            .unwrap_or(ptr::null_mut()),
        None => ptr::null_mut(),
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn argos_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn argos_discover_options_default() -> ArgosDiscoverOptions {
    let d = DiscoverConfig::default();
    ArgosDiscoverOptions {
        degree: d.degree,
        trig: d.trig,
        chains: d.bayes.chains,
        iters: d.bayes.iters,
        warmup: d.bayes.warmup,
        ci_level: d.bayes.ci_level,
        seed: d.seed,
    }
}

/// Simulates a built-in system. `dt <= 0` selects the system default and a
/// non-finite `snr_db` (e.g. `INFINITY`) means no noise.
///
/// # Safety
/// `system` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn argos_simulate(
    system: *const c_char,
    dt: f64,
    n: usize,
    snr_db: f64,
    seed: u64,
    out: *mut *mut ArgosTrajectory,
) -> ArgosStatus {
    guard(|| {
        non_null(out, "out")?;
        let name = c_str(system, "system")?;
        let sys = builtin_system(name).or_status()?;
        let dt = if dt > 0.0 { dt } else { sys.default_dt };
        let snr = if snr_db.is_finite() {
            Snr::Db(snr_db)
        } else {
            Snr::Infinite
        };
        let ic = sample_initial_condition(&sys, derive(seed, Stream::InitialCondition, &[0]));
        let clean = simulate(&sys, &ic, dt, n).or_status()?;
        let spec = NoiseSpec::new(snr, derive(seed, Stream::Noise, &[])).or_status()?;
        let traj = add_noise(&clean, &spec).or_status()?;
        *out = Box::into_raw(Box::new(ArgosTrajectory(traj)));
        Ok(())
    })
}

/// Wraps caller data: `states` is `n x dim`, row-major, sampled every `dt`
/// from time 0.
///
/// # Safety
/// `states` must point to `n * dim` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn argos_trajectory_from_data(
    states: *const f64,
    n: usize,
    dim: usize,
    dt: f64,
    out: *mut *mut ArgosTrajectory,
) -> ArgosStatus {
    guard(|| {
        non_null(out, "out")?;
        non_null(states, "states")?;
        if n < 2 || dim == 0 {
            return Err(fail(
                ArgosStatus::InvalidArgument,
                format!("need n >= 2 and dim >= 1, got {n} x {dim}"),
            ));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(fail(
                ArgosStatus::InvalidArgument,
                format!("dt must be positive, got {dt}"),
            ));
        }
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| fail(ArgosStatus::InvalidArgument, "size overflow"))?;
        let data = std::slice::from_raw_parts(states, len);
        if data.iter().any(|v| !v.is_finite()) {
            return Err(fail(
                ArgosStatus::InvalidArgument,
                "states contain non-finite values",
            ));
        }
        let m = DMatrix::from_row_slice(n, dim, data);
        let times = (0..n).map(|i| i as f64 * dt).collect();
        *out = Box::into_raw(Box::new(ArgosTrajectory(Trajectory::new(
            times, m, dt, true,
        ))));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn argos_trajectory_load_csv(
    path: *const c_char,
    out: *mut *mut ArgosTrajectory,
) -> ArgosStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = c_str(path, "path")?;
        let t = Trajectory::load_csv(Path::new(p)).or_status()?;
        *out = Box::into_raw(Box::new(ArgosTrajectory(t)));
        Ok(())
    })
}

/// # Safety
/// `traj` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn argos_trajectory_save_csv(
    traj: *const ArgosTrajectory,
    path: *const c_char,
) -> ArgosStatus {
    guard(|| {
        non_null(traj, "traj")?;
        let p = c_str(path, "path")?;
        (*traj).0.save_csv(Path::new(p)).or_status()
    })
}

/// # Safety
/// `traj` must be a live handle; `n` and `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn argos_trajectory_shape(
    traj: *const ArgosTrajectory,
    n: *mut usize,
    dim: *mut usize,
) -> ArgosStatus {
    guard(|| {
        non_null(traj, "traj")?;
        non_null(n, "n")?;
        non_null(dim, "dim")?;
        *n = (*traj).0.len();
        *dim = (*traj).0.dim();
        Ok(())
    })
}

/// Copies the states, row-major, into `buf` of length `len >= n * dim`.
///
/// # Safety
/// `traj` must be a live handle; `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn argos_trajectory_copy_states(
    traj: *const ArgosTrajectory,
    buf: *mut f64,
    len: usize,
) -> ArgosStatus {
    guard(|| {
        non_null(traj, "traj")?;
        non_null(buf, "buf")?;
        let s = &(*traj).0.states;
        let need = s.nrows() * s.ncols();
        if len < need {
            return Err(fail(
                ArgosStatus::OutOfRange,
                format!("buffer holds {len} values, {need} needed"),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, need);
        for i in 0..s.nrows() {
            for j in 0..s.ncols() {
                out[i * s.ncols() + j] = s[(i, j)];
            }
        }
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn argos_trajectory_free(traj: *mut ArgosTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Identifies governing equations. `options` may be null for defaults.
///
/// # Safety
/// `traj` must be a live handle; `options` null or readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn argos_discover(
    traj: *const ArgosTrajectory,
    options: *const ArgosDiscoverOptions,
    out: *mut *mut ArgosModel,
) -> ArgosStatus {
    guard(|| {
        non_null(traj, "traj")?;
        non_null(out, "out")?;
        let o = if options.is_null() {
            argos_discover_options_default()
        } else {
            *options
        };
        let cfg = DiscoverConfig {
            degree: o.degree,
            trig: o.trig,
            bayes: BayesConfig {
                chains: o.chains,
                iters: o.iters,
                warmup: o.warmup,
                ci_level: o.ci_level,
                ..BayesConfig::default()
            },
            seed: o.seed,
            ..DiscoverConfig::default()
        };
        let model = discover(&(*traj).0, &cfg).or_status()?;
        *out = Box::into_raw(Box::new(ArgosModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn argos_model_n_equations(
    model: *const ArgosModel,
    count: *mut usize,
) -> ArgosStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(count, "count")?;
        *count = (*model).0.equations.len();
        Ok(())
    })
}

/// Number of retained terms in equation `eq` (zero-based).
///
/// # Safety
/// `model` must be a live handle; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn argos_model_n_terms(
    model: *const ArgosModel,
    eq: usize,
    count: *mut usize,
) -> ArgosStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(count, "count")?;
        let eqs = &(*model).0.equations;
        let e = eqs.get(eq).ok_or_else(|| {
            fail(
                ArgosStatus::OutOfRange,
                format!("equation {eq} of {}", eqs.len()),
            )
        })?;
        *count = e.terms.len();
        Ok(())
    })
}

/// Term `k` of equation `eq`. When `name` is non-null it receives the term
/// name, to be freed with [`argos_string_free`].
///
/// # Safety
/// `model` must be a live handle; `term` writable; `name` null or writable.
#[no_mangle]
pub unsafe extern "C" fn argos_model_term(
    model: *const ArgosModel,
    eq: usize,
    k: usize,
    term: *mut ArgosTerm,
    name: *mut *mut c_char,
) -> ArgosStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(term, "term")?;
        let eqs = &(*model).0.equations;
        let t = eqs.get(eq).and_then(|e| e.terms.get(k)).ok_or_else(|| {
            fail(
                ArgosStatus::OutOfRange,
                format!("no term {k} in equation {eq}"),
            )
        })?;
        *term = ArgosTerm {
            mean: t.mean,
            ci_lo: t.ci_lo,
            ci_hi: t.ci_hi,
        };
        if !name.is_null() {
            *name = to_c_string(t.name.clone())?;
        }
        Ok(())
    })
}

/// JSON form of the model; free with [`argos_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn argos_model_to_json(
    model: *const ArgosModel,
    out: *mut *mut c_char,
) -> ArgosStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = to_c_string((*model).0.to_json().or_status()?)?;
        Ok(())
    })
}

/// Equations as text, one per line; free with [`argos_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn argos_model_to_text(
    model: *const ArgosModel,
    out: *mut *mut c_char,
) -> ArgosStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = to_c_string((*model).0.to_text())?;
        Ok(())
    })
}

/// Sets `*matches` to whether every equation has exactly the true terms of
/// the named built-in system.
///
/// # Safety
/// `model` must be a live handle; `system` NUL-terminated; `matches` writable.
#[no_mangle]
pub unsafe extern "C" fn argos_model_matches_truth(
    model: *const ArgosModel,
    system: *const c_char,
    matches: *mut bool,
) -> ArgosStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(matches, "matches")?;
        let sys = builtin_system(c_str(system, "system")?).or_status()?;
        *matches = compare_truth(&(*model).0, &sys).or_status()?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn argos_model_free(model: *mut ArgosModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Modal analysis of `dz/dt = A z + b` (`a` row-major, `m x m`), as JSON.
///
/// # Safety
/// `a` must hold `m * m` doubles, `b` `m` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn argos_modal_analysis_json(
    a: *const f64,
    b: *const f64,
    m: usize,
    out: *mut *mut c_char,
) -> ArgosStatus {
    guard(|| {
        non_null(a, "a")?;
        non_null(b, "b")?;
        non_null(out, "out")?;
        if m == 0 {
            return Err(fail(ArgosStatus::InvalidArgument, "m must be positive"));
        }
        let am = DMatrix::from_row_slice(m, m, std::slice::from_raw_parts(a, m * m));
        let bv = DVector::from_column_slice(std::slice::from_raw_parts(b, m));
        let modes = analyze_affine_modes(&am, &bv).or_status()?;
        let text =
            serde_json::to_string(&modes).map_err(|e| fail(ArgosStatus::Parse, e.to_string()))?;
        *out = to_c_string(text)?;
        Ok(())
    })
}
