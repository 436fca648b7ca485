//! C ABI over the `speedlimit` library.
//!
//! Every fallible function returns an [`SlStatus`]; on failure a message is
//! available from [`sl_last_error`] on the calling thread. Handles are
//! opaque and must be released with their `_free` function. Matrices are
//! row-major `double` arrays of `dim * dim` entries.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;

use speedlimit::bounds::{evaluate_bound_with, tau_lower_bounds, BoundKind, BoundOptions};
use speedlimit::config::RunConfig;
use speedlimit::current::{accumulate_actions, ActionBreakdown};
use speedlimit::langevin::{
    equilibrium_state, propagate_moments, GaussianState, LinearLangevinSystem, MobilityMatrix, MomentTrajectory,
};
use speedlimit::scenarios::{RlcScenario, TrapProtocol, TrapScenario};
use speedlimit::schedule::Schedule;
use speedlimit::wasserstein::{w2_gaussian, w2_weighted};
use speedlimit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid parameters, dimensions or configuration text.
    InvalidArgument = 2,
    /// Integration or linear-algebra failure.
    Numeric = 3,
    /// The requested bound does not apply to this system.
    Applicability = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// Integrated functionals over the horizon, SI units.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SlActions {
    pub horizon: f64,
    pub sigma: f64,
    pub upsilon: f64,
    pub phi: f64,
    pub sigma_sys: f64,
    pub sigma_env: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SlBoundResult {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    /// Power of k_B carried by `lhs`, `rhs` and `slack`.
    pub kb_power: f64,
    pub satisfied: bool,
}

pub struct SlSystem {
    inner: LinearLangevinSystem,
}

pub struct SlTrajectory {
    traj: MomentTrajectory,
    breakdown: OnceLock<Result<ActionBreakdown, Error>>,
}

impl SlTrajectory {
    fn breakdown(&self) -> Result<&ActionBreakdown, Fail> {
        self.breakdown
            .get_or_init(|| accumulate_actions(&self.traj))
            .as_ref()
            .map_err(|e| Fail::Core(e.clone()))
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|l| *l.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            SlStatus::Ok
        }
        Ok(Err(fail)) => {
            let (status, msg) = match fail {
                Fail::Null(what) => (SlStatus::NullPointer, format!("null pointer: {what}")),
                Fail::Arg(m) => (SlStatus::InvalidArgument, m),
                Fail::Core(e @ Error::Applicability(_)) => (SlStatus::Applicability, e.to_string()),
                Fail::Core(e) if e.is_configuration() => (SlStatus::InvalidArgument, e.to_string()),
                Fail::Core(e) => (SlStatus::Numeric, e.to_string()),
            };
            set_last_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            SlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Arg(format!("{what} is not UTF-8")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn state(dim: usize, mean: *const f64, cov: *const f64) -> Result<GaussianState, Fail> {
    Ok(GaussianState::from_slices(
        slice(mean, dim, "mean")?,
        slice(cov, dim * dim, "cov")?,
    )?)
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn sl_last_error() -> *const c_char {
    LAST_ERROR.with(|l| l.borrow().as_ptr())
}

/// NUL-terminated library version.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Underdamped particle in the minimum-entropy trap `4kT/(2-t)^2 + γ/(2-t)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_system_trap_paper(
    mass: f64,
    friction: f64,
    kb: f64,
    temperature: f64,
    horizon: f64,
    out: *mut *mut SlSystem,
) -> SlStatus {
    guard(|| {
        let sc = TrapScenario {
            mass,
            friction,
            kb,
            temperature,
            horizon,
            ..TrapScenario::default()
        };
        emit(out, SlSystem { inner: sc.system()? })
    })
}

/// Underdamped particle in a harmonic trap of fixed stiffness.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_system_trap_constant(
    mass: f64,
    friction: f64,
    kb: f64,
    temperature: f64,
    stiffness: f64,
    horizon: f64,
    out: *mut *mut SlSystem,
) -> SlStatus {
    guard(|| {
        let sc = TrapScenario {
            mass,
            friction,
            kb,
            temperature,
            horizon,
            protocol: TrapProtocol::Stiffness {
                stiffness: Schedule::constant(stiffness),
            },
            ..TrapScenario::default()
        };
        emit(out, SlSystem { inner: sc.system()? })
    })
}

/// Series RLC circuit whose inductance ramps linearly from `l_start` to
/// `l_end` over the horizon.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_system_rlc_linear(
    resistance: f64,
    capacitance: f64,
    l_start: f64,
    l_end: f64,
    kb: f64,
    temperature: f64,
    horizon: f64,
    out: *mut *mut SlSystem,
) -> SlStatus {
    guard(|| {
        let sc = RlcScenario {
            resistance,
            capacitance,
            kb,
            temperature,
            horizon,
            inductance: Schedule::Linear {
                start: l_start,
                end: l_end,
                horizon,
            },
            ..RlcScenario::default()
        };
        emit(out, SlSystem { inner: sc.system()? })
    })
}

/// System described by a TOML run configuration (same format as the CLI).
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_system_from_config(toml: *const c_char, out: *mut *mut SlSystem) -> SlStatus {
    guard(|| {
        let cfg = RunConfig::from_toml(str_arg(toml, "toml")?)?;
        cfg.validate()?;
        emit(out, SlSystem { inner: cfg.system()? })
    })
}

/// Phase-space dimension, or 0 for a null handle.
///
/// # Safety
/// `system` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_system_dim(system: *const SlSystem) -> usize {
    system.as_ref().map_or(0, |s| s.inner.dim())
}

/// # Safety
/// `system` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_system_free(system: *mut SlSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Integrates the moment equations with `steps` RK4 steps. When both
/// `mean` and `cov` are null the start is the equilibrium of the t = 0
/// drift; otherwise both must hold `dim` and `dim * dim` entries.
///
/// # Safety
/// `system` must be a live handle, `out` a valid pointer and the arrays
/// null or of the stated size.
#[no_mangle]
pub unsafe extern "C" fn sl_propagate(
    system: *const SlSystem,
    mean: *const f64,
    cov: *const f64,
    steps: usize,
    out: *mut *mut SlTrajectory,
) -> SlStatus {
    guard(|| {
        let sys = &deref(system, "system")?.inner;
        let initial = if mean.is_null() && cov.is_null() {
            equilibrium_state(sys, 0.0)?
        } else {
            state(sys.dim(), mean, cov)?
        };
        let traj = propagate_moments(sys, &initial, steps)?;
        emit(
            out,
            SlTrajectory {
                traj,
                breakdown: OnceLock::new(),
            },
        )
    })
}

/// Number of stored states (`steps + 1`), or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_trajectory_len(traj: *const SlTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.traj.states.len())
}

/// Copies the time, mean and covariance of state `index`. Any output
/// pointer may be null.
///
/// # Safety
/// `traj` must be a live handle; non-null outputs must hold 1, `dim` and
/// `dim * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn sl_trajectory_state(
    traj: *const SlTrajectory,
    index: usize,
    time: *mut f64,
    mean: *mut f64,
    cov: *mut f64,
) -> SlStatus {
    guard(|| {
        let t = &deref(traj, "traj")?.traj;
        let st = t
            .states
            .get(index)
            .ok_or_else(|| Fail::Arg(format!("index {index} out of range 0..{}", t.states.len())))?;
        let n = st.dim();
        if !time.is_null() {
            *time = t.times[index];
        }
        if !mean.is_null() {
            std::slice::from_raw_parts_mut(mean, n).copy_from_slice(st.mean.as_slice());
        }
        if !cov.is_null() {
            let dst = std::slice::from_raw_parts_mut(cov, n * n);
            for i in 0..n {
                for j in 0..n {
                    dst[i * n + j] = st.cov[(i, j)];
                }
            }
        }
        Ok(())
    })
}

/// # Safety
/// `traj` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_trajectory_actions(traj: *const SlTrajectory, out: *mut SlActions) -> SlStatus {
    guard(|| {
        let b = deref(traj, "traj")?.breakdown()?;
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        *out = SlActions {
            horizon: b.horizon,
            sigma: b.sigma,
            upsilon: b.upsilon,
            phi: b.phi,
            sigma_sys: b.sigma_sys,
            sigma_env: b.sigma_env,
        };
        Ok(())
    })
}

/// Evaluates a bound by name, e.g. `"MASTER"` or `"ALPHA_FAMILY(1,0.5)"`.
/// A non-positive `tolerance` selects the library default.
///
/// # Safety
/// `traj` must be a live handle, `kind` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sl_evaluate_bound(
    traj: *const SlTrajectory,
    kind: *const c_char,
    tolerance: f64,
    out: *mut SlBoundResult,
) -> SlStatus {
    guard(|| {
        let t = deref(traj, "traj")?;
        let kind: BoundKind = str_arg(kind, "kind")?.parse()?;
        let mut opts = BoundOptions::default();
        if tolerance > 0.0 {
            opts.tolerance = tolerance;
        }
        let r = evaluate_bound_with(kind, &t.traj, t.breakdown()?, &opts)?;
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        *out = SlBoundResult {
            lhs: r.lhs,
            rhs: r.rhs,
            slack: r.slack,
            tolerance: r.tolerance,
            kb_power: r.kb_power,
            satisfied: r.satisfied,
        };
        Ok(())
    })
}

/// Transition-time lower bounds for an underdamped trajectory.
///
/// # Safety
/// `traj` must be a live handle; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sl_tau_bounds(traj: *const SlTrajectory, tau24: *mut f64, tau25: *mut f64) -> SlStatus {
    guard(|| {
        let t = deref(traj, "traj")?;
        let tb = tau_lower_bounds(&t.traj, t.breakdown()?)?;
        *tau24.as_mut().ok_or(Fail::Null("tau24"))? = tb.tau24;
        *tau25.as_mut().ok_or(Fail::Null("tau25"))? = tb.tau25;
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_trajectory_free(traj: *mut SlTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Closed-form 2-Wasserstein distance between two Gaussians. A non-null
/// `mobility` (`dim` positive entries) selects the weighted metric.
///
/// # Safety
/// Arrays must hold `dim` or `dim * dim` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_w2_gaussian(
    dim: usize,
    mean0: *const f64,
    cov0: *const f64,
    mean1: *const f64,
    cov1: *const f64,
    mobility: *const f64,
    out: *mut f64,
) -> SlStatus {
    guard(|| {
        let g0 = state(dim, mean0, cov0)?;
        let g1 = state(dim, mean1, cov1)?;
        let d = if mobility.is_null() {
            w2_gaussian(&g0, &g1)?
        } else {
            let m = MobilityMatrix::new(slice(mobility, dim, "mobility")?)?;
            w2_weighted(&g0, &g1, &m)?
        };
        *out.as_mut().ok_or(Fail::Null("out"))? = d;
        Ok(())
    })
}
