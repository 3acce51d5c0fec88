//! C ABI over `pertdesign`.
//!
//! Objects are opaque handles created by `*_new` and released by `*_free`.
//! Every fallible call returns a `PdStatus`; on failure a message for the
//! calling thread is available from `pd_last_error`. Panics are caught at
//! the boundary and reported as `PD_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::DVector;
use pertdesign::designer::{design_step, DesignInputs, Endpoint};
use pertdesign::harness::{Experiment, ExperimentConfig, Policy};
use pertdesign::plant::{ArmaxModel, Controller, ModelOrders};
use pertdesign::poly::Polynomial;
use pertdesign::sensitivity::{
    build_sensitivity, constraint_bounds, ConstraintContext, ConstraintStatus,
    PerturbationHistory, PerturbationLimits, SensitivityModel,
};
use pertdesign::Error;

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NonFinite = 4,
    Diverged = 5,
    Io = 6,
    Finished = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PdPolicy {
    Designed = 0,
    Prbs = 1,
    Zero = 2,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PdConstraintStatus {
    Feasible = 0,
    Degenerate = 1,
    Projected = 2,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct PdLimits {
    pub d_min: f64,
    pub d_max: f64,
    pub yd_min: f64,
    pub yd_max: f64,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PdConstraint {
    pub g1: f64,
    pub h: f64,
    pub d_lo: f64,
    pub d_hi: f64,
    pub status: PdConstraintStatus,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct PdDesign {
    pub d: f64,
    pub d_m: f64,
    /// 1 when the lower endpoint was chosen.
    pub chose_lower: i32,
    pub output_active: i32,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct PdStep {
    pub t: u64,
    pub r: f64,
    pub u: f64,
    pub d: f64,
    pub u_tilde: f64,
    pub y_tilde: f64,
    pub delta: f64,
    pub delta_next: f64,
    pub mse_next: f64,
}

/// Opaque experiment handle.
pub struct PdExperiment(Experiment);

/// Opaque load sensitivity handle.
pub struct PdSensitivity(SensitivityModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PdStatus {
    match e {
        Error::Config(_) => PdStatus::Config,
        Error::NonFinite(_) => PdStatus::NonFinite,
        Error::Diverged { .. } => PdStatus::Diverged,
        Error::Io { .. } => PdStatus::Io,
        _ => PdStatus::InvalidArgument,
    }
}

struct Fail(PdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PdStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            PdStatus::Panic
        }
    }
}

unsafe fn as_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

fn poly(c: &[f64]) -> Result<Polynomial, Fail> {
    Ok(Polynomial::new(c.to_vec())?)
}

impl From<PdLimits> for PerturbationLimits {
    fn from(l: PdLimits) -> Self {
        PerturbationLimits {
            d_min: l.d_min,
            d_max: l.d_max,
            yd_min: l.yd_min,
            yd_max: l.yd_max,
        }
    }
}

impl From<ConstraintStatus> for PdConstraintStatus {
    fn from(s: ConstraintStatus) -> Self {
        match s {
            ConstraintStatus::Feasible => PdConstraintStatus::Feasible,
            ConstraintStatus::Degenerate => PdConstraintStatus::Degenerate,
            ConstraintStatus::Projected => PdConstraintStatus::Projected,
        }
    }
}

impl From<PdConstraintStatus> for ConstraintStatus {
    fn from(s: PdConstraintStatus) -> Self {
        match s {
            PdConstraintStatus::Feasible => ConstraintStatus::Feasible,
            PdConstraintStatus::Degenerate => ConstraintStatus::Degenerate,
            PdConstraintStatus::Projected => ConstraintStatus::Projected,
        }
    }
}

impl From<ConstraintContext> for PdConstraint {
    fn from(c: ConstraintContext) -> Self {
        PdConstraint {
            g1: c.g1,
            h: c.h,
            d_lo: c.d_lo,
            d_hi: c.d_hi,
            status: c.status.into(),
        }
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Limits `d in [-d_max, d_max]`, `delta in [-yd_max, yd_max]`; `yd_max` may be
/// `INFINITY`.
#[no_mangle]
pub extern "C" fn pd_limits_symmetric(d_max: f64, yd_max: f64) -> PdLimits {
    let l = PerturbationLimits::symmetric(d_max, yd_max);
    PdLimits {
        d_min: l.d_min,
        d_max: l.d_max,
        yd_min: l.yd_min,
        yd_max: l.yd_max,
    }
}

/// Benchmark experiment with the given output bound, policy and run seed.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn pd_experiment_new_default(
    yd_max: f64,
    policy: PdPolicy,
    seed: u64,
    out: *mut *mut PdExperiment,
) -> PdStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let policy = match policy {
            PdPolicy::Designed => Policy::Designed,
            PdPolicy::Prbs => Policy::Prbs,
            PdPolicy::Zero => Policy::Zero,
        };
        let cfg = ExperimentConfig::default()
            .with_yd_max(yd_max)
            .with_policy(policy);
        *out = Box::into_raw(Box::new(PdExperiment(Experiment::new(cfg, seed)?)));
        Ok(())
    })
}

/// Experiment from a TOML configuration text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_experiment_new_from_toml(
    toml: *const c_char,
    seed: u64,
    out: *mut *mut PdExperiment,
) -> PdStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|_| Fail(PdStatus::Config, "config is not valid UTF-8".into()))?;
        let cfg = ExperimentConfig::from_toml_str(text)?;
        *out = Box::into_raw(Box::new(PdExperiment(Experiment::new(cfg, seed)?)));
        Ok(())
    })
}

/// Advances one sample. Returns `PD_STATUS_FINISHED` once all configured
/// steps have run.
///
/// # Safety
/// `exp` must come from a `pd_experiment_new_*` call; `out` may be null.
#[no_mangle]
pub unsafe extern "C" fn pd_experiment_step(exp: *mut PdExperiment, out: *mut PdStep) -> PdStatus {
    guard(|| {
        let exp = &mut as_mut(exp, "experiment")?.0;
        if exp.is_finished() {
            return Err(Fail(PdStatus::Finished, "experiment finished".into()));
        }
        let s = exp.step()?;
        if let Some(out) = out.as_mut() {
            *out = PdStep {
                t: s.t as u64,
                r: s.r,
                u: s.u,
                d: s.d,
                u_tilde: s.u_tilde,
                y_tilde: s.y_tilde,
                delta: s.delta,
                delta_next: s.delta_next,
                mse_next: s.mse_next,
            };
        }
        Ok(())
    })
}

/// Samples processed so far.
///
/// # Safety
/// `exp` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn pd_experiment_time(exp: *const PdExperiment) -> u64 {
    exp.as_ref().map_or(0, |e| e.0.time() as u64)
}

/// Copies the current estimate `[b, a, c]` into `buf`. `len` must be at least
/// the parameter count, which is always written to `written`.
///
/// # Safety
/// `buf` must hold `len` doubles; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_experiment_theta(
    exp: *const PdExperiment,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> PdStatus {
    guard(|| {
        let exp = &as_ref(exp, "experiment")?.0;
        let written = as_mut(written, "written")?;
        let theta = exp.estimator().theta();
        *written = theta.len();
        if len < theta.len() {
            return Err(Fail(
                PdStatus::InvalidArgument,
                format!("buffer holds {len} values, need {}", theta.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        slice::from_raw_parts_mut(buf, theta.len()).copy_from_slice(theta.as_slice());
        Ok(())
    })
}

/// # Safety
/// `exp` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pd_experiment_free(exp: *mut PdExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Load sensitivity of `B/A` under controller `L/M`, truncated to `horizon`.
/// Coefficient arrays start at `q^0`.
///
/// # Safety
/// Each array must hold the given number of doubles; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn pd_sensitivity_new(
    b: *const f64,
    nb: usize,
    a: *const f64,
    na: usize,
    l: *const f64,
    nl: usize,
    m: *const f64,
    nm: usize,
    horizon: usize,
    out: *mut *mut PdSensitivity,
) -> PdStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let b = poly(as_slice(b, nb, "b")?)?;
        let a = poly(as_slice(a, na, "a")?)?;
        let ctrl = Controller::new(poly(as_slice(l, nl, "l")?)?, poly(as_slice(m, nm, "m")?)?)?;
        let model = ArmaxModel::new(b, a, Polynomial::one(), 0.0)?;
        *out = Box::into_raw(Box::new(PdSensitivity(build_sensitivity(
            &model, &ctrl, horizon,
        )?)));
        Ok(())
    })
}

/// Sensitivity of the built-in benchmark plant and PI controller.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_sensitivity_benchmark(
    horizon: usize,
    out: *mut *mut PdSensitivity,
) -> PdStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let model = pertdesign::benchmark::reference_model();
        let ctrl = pertdesign::benchmark::reference_controller();
        *out = Box::into_raw(Box::new(PdSensitivity(build_sensitivity(
            &model, &ctrl, horizon,
        )?)));
        Ok(())
    })
}

/// Truncation horizon, or 0 for a null handle.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pd_sensitivity_horizon(s: *const PdSensitivity) -> usize {
    s.as_ref().map_or(0, |s| s.0.horizon())
}

/// 1 if the closed-loop denominator is stable, 0 if not, -1 for null.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pd_sensitivity_is_stable(s: *const PdSensitivity) -> i32 {
    s.as_ref().map_or(-1, |s| s.0.is_stable() as i32)
}

/// Copies `g_1..g_k` into `buf`, which must hold `horizon` values.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pd_sensitivity_impulse(
    s: *const PdSensitivity,
    buf: *mut f64,
    len: usize,
) -> PdStatus {
    guard(|| {
        let g = as_ref(s, "sensitivity")?.0.impulse();
        if len < g.len() {
            return Err(Fail(
                PdStatus::InvalidArgument,
                format!("buffer holds {len} values, need {}", g.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        slice::from_raw_parts_mut(buf, g.len()).copy_from_slice(g);
        Ok(())
    })
}

/// Feasible interval for the next perturbation. `history[0]` is the most
/// recent applied perturbation; entries beyond the horizon are ignored.
///
/// # Safety
/// `history` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_constraint_bounds(
    s: *const PdSensitivity,
    history: *const f64,
    len: usize,
    limits: PdLimits,
    out: *mut PdConstraint,
) -> PdStatus {
    guard(|| {
        let s = &as_ref(s, "sensitivity")?.0;
        let out = as_mut(out, "out")?;
        let past = as_slice(history, len, "history")?;
        let limits: PerturbationLimits = limits.into();
        limits.validate()?;
        let mut h = PerturbationHistory::new(s.horizon());
        for &d in past.iter().take(h.depth()).rev() {
            h.push(d);
        }
        *out = constraint_bounds(s, &h, &limits).into();
        Ok(())
    })
}

/// Closed-form one-step design. `r12` and `xi` both hold `n` values.
///
/// # Safety
/// `r12` and `xi` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_design_step(
    r11: f64,
    r12: *const f64,
    xi: *const f64,
    n: usize,
    u_hat: f64,
    bounds: PdConstraint,
    limits: PdLimits,
    out: *mut PdDesign,
) -> PdStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let inputs = DesignInputs {
            r11,
            r12: DVector::from_column_slice(as_slice(r12, n, "r12")?),
            xi: DVector::from_column_slice(as_slice(xi, n, "xi")?),
            u_hat,
            bounds: ConstraintContext {
                g1: bounds.g1,
                h: bounds.h,
                d_lo: bounds.d_lo,
                d_hi: bounds.d_hi,
                status: bounds.status.into(),
            },
        };
        let (d, diag) = design_step(&inputs, &limits.into())?;
        *out = PdDesign {
            d,
            d_m: diag.d_m,
            chose_lower: (diag.chosen == Endpoint::Lower) as i32,
            output_active: diag.output_active as i32,
        };
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pd_sensitivity_free(s: *mut PdSensitivity) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of estimated parameters `nb + na + nc` for the given orders.
#[no_mangle]
pub extern "C" fn pd_num_params(nb: usize, na: usize, nc: usize) -> usize {
    ModelOrders { nb, na, nc }.num_params()
}
