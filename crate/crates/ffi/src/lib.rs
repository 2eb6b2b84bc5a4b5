//! C ABI over `cusplab`.
//!
//! Every entry point returns a [`CusplabStatus`] and writes results through
//! out-pointers. Objects are opaque handles owned by the caller and released
//! with the matching `*_free`. After a non-zero status the message is
//! available from [`cusplab_last_error_message`] on the same thread.
//!
//! Panics never cross the boundary; they surface as `CUSPLAB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cusplab::asymptotics::{energy_leading, lower_bound, AsymptoticModel};
use cusplab::collision::{
    classify, integrate_collision, CollisionSetup, CollisionTrajectory, MassModel, Regime,
};
use cusplab::error::Error;
use cusplab::geometry::{strip_length, CuspProfile, StripLength};
use cusplab::mesh::build_domain_with_width;
use cusplab::solver::{solve_domain, Discretization, SolveOptions};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CusplabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidProfile = 3,
    Mesh = 4,
    /// Quadrature or conjugate gradient missed its tolerance.
    NotConverged = 5,
    Extrapolation = 6,
    Numerical = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CusplabLawKind {
    Power = 0,
    Log = 1,
    Bounded = 2,
}

/// `coefficient · ε^exponent`, `coefficient · |ln ε|`, or a bounded energy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusplabLaw {
    pub kind: CusplabLawKind,
    pub coefficient: f64,
    /// Zero unless `kind` is `Power`.
    pub exponent: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CusplabRegime {
    RealShock = 0,
    SmoothLanding = 1,
    Unresolved = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusplabSolveOptions {
    /// Elements across the unit height.
    pub n_across: usize,
    /// Cell growth factor along the strip, at least 1.
    pub grading: f64,
    pub tol: f64,
    /// Width of the fixed block attached at the strip entrance.
    pub d_width: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusplabEnergy {
    pub energy: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusplabSample {
    pub t: f64,
    pub epsilon: f64,
    pub velocity: f64,
}

/// Cusp or flat-band gap profile.
pub struct CusplabProfile(CuspProfile);

/// Integrated approach of a rigid body toward contact.
pub struct CusplabTrajectory(CollisionTrajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CusplabStatus {
    match e {
        Error::InvalidProfile(_) => CusplabStatus::InvalidProfile,
        Error::Domain { .. } | Error::Parameter(_) | Error::Config { .. } => {
            CusplabStatus::InvalidArgument
        }
        Error::Mesh(_) | Error::SingularElement { .. } => CusplabStatus::Mesh,
        Error::Quadrature { .. } | Error::NonConvergence { .. } => CusplabStatus::NotConverged,
        Error::Extrapolation { .. } => CusplabStatus::Extrapolation,
        _ => CusplabStatus::Numerical,
    }
}

/// Runs `f`, records any error or panic, and returns its status.
fn guard(f: impl FnOnce() -> Result<(), (CusplabStatus, String)>) -> CusplabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            CusplabStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {message}"));
            CusplabStatus::Panic
        }
    }
}

fn lib(e: Error) -> (CusplabStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (CusplabStatus, String) {
    (CusplabStatus::NullPointer, format!("{name} is null"))
}

/// # Safety
/// `p` is null or a live pointer produced by this library.
unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (CusplabStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

/// # Safety
/// `out` is null or valid for one write of `T`.
unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), (CusplabStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn cusplab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn cusplab_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string"),
        };
    VERSION.as_ptr()
}

/// Power cusp `κ|ξ|^{1+α} + ε` on `[δ, 0]`.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn cusplab_profile_power(
    kappa: f64,
    alpha: f64,
    epsilon: f64,
    delta: f64,
    out: *mut *mut CusplabProfile,
) -> CusplabStatus {
    guard(|| {
        let p = CuspProfile::power(kappa, alpha, epsilon, delta).map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(CusplabProfile(p))), "out")
    })
}

/// Profile whose solid is flat on `[δ′, 0)`.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn cusplab_profile_flat(
    kappa: f64,
    alpha: f64,
    epsilon: f64,
    delta: f64,
    delta_prime: f64,
    out: *mut *mut CusplabProfile,
) -> CusplabStatus {
    guard(|| {
        let p = CuspProfile::flat(kappa, alpha, epsilon, delta, delta_prime).map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(CusplabProfile(p))), "out")
    })
}

/// # Safety
/// `profile` is null or came from a `cusplab_profile_*` constructor and was not freed.
#[no_mangle]
pub unsafe extern "C" fn cusplab_profile_free(profile: *mut CusplabProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Strip length `ℓ_ε`; `+∞` when `ε = 0`.
///
/// # Safety
/// `profile` is a live handle and `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cusplab_strip_length(
    profile: *const CusplabProfile,
    out: *mut f64,
) -> CusplabStatus {
    guard(|| {
        let p = deref(profile, "profile")?;
        let l = match strip_length(&p.0).map_err(lib)? {
            StripLength::Finite(l) => l,
            StripLength::Infinite => f64::INFINITY,
        };
        write_out(out, l, "out")
    })
}

/// Leading-order energy law of the profile.
///
/// # Safety
/// `profile` is a live handle and `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cusplab_energy_leading(
    profile: *const CusplabProfile,
    out: *mut CusplabLaw,
) -> CusplabStatus {
    guard(|| {
        let p = deref(profile, "profile")?;
        let law = match energy_leading(&p.0).map_err(lib)? {
            AsymptoticModel::PowerLaw {
                coefficient,
                exponent,
            } => CusplabLaw {
                kind: CusplabLawKind::Power,
                coefficient,
                exponent,
            },
            AsymptoticModel::LogLaw { coefficient } => CusplabLaw {
                kind: CusplabLawKind::Log,
                coefficient,
                exponent: 0.0,
            },
            AsymptoticModel::Bounded { limit } => CusplabLaw {
                kind: CusplabLawKind::Bounded,
                coefficient: limit.unwrap_or(f64::NAN),
                exponent: 0.0,
            },
        };
        write_out(out, law, "out")
    })
}

/// Closed-form lower bound on the energy (α > 2 or flat band).
///
/// # Safety
/// `profile` is a live handle and `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cusplab_lower_bound(
    profile: *const CusplabProfile,
    out: *mut f64,
) -> CusplabStatus {
    guard(|| {
        let p = deref(profile, "profile")?;
        write_out(out, lower_bound(&p.0).map_err(lib)?.value, "out")
    })
}

/// Defaults used by the command-line tool.
#[no_mangle]
pub extern "C" fn cusplab_solve_options_default() -> CusplabSolveOptions {
    let d = Discretization::default();
    CusplabSolveOptions {
        n_across: d.n_across,
        grading: d.grading,
        tol: d.solve.tol,
        d_width: 1.0,
    }
}

/// Finite-element Dirichlet energy for a profile with `ε > 0`.
///
/// # Safety
/// `profile` is a live handle, `options` is null (defaults) or readable, and
/// `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cusplab_solve_energy(
    profile: *const CusplabProfile,
    options: *const CusplabSolveOptions,
    out: *mut CusplabEnergy,
) -> CusplabStatus {
    guard(|| {
        let p = deref(profile, "profile")?;
        let o = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| cusplab_solve_options_default());
        let base = Discretization::default();
        let disc = Discretization {
            n_across: o.n_across,
            grading: o.grading,
            solve: SolveOptions {
                tol: o.tol,
                ..base.solve
            },
        };
        let domain = build_domain_with_width(&p.0, None, o.d_width).map_err(lib)?;
        let s = solve_domain(&domain, &disc).map_err(lib)?.solution;
        let e = CusplabEnergy {
            energy: s.dirichlet_energy,
            iterations: s.iterations,
            residual: s.residual_norm,
        };
        write_out(out, e, "out")
    })
}

fn regime(r: Regime) -> CusplabRegime {
    match r {
        Regime::RealShock => CusplabRegime::RealShock,
        Regime::SmoothLanding => CusplabRegime::SmoothLanding,
        Regime::Unresolved => CusplabRegime::Unresolved,
    }
}

/// Contact regime predicted from the profile's energy law.
///
/// # Safety
/// `profile` is a live handle and `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cusplab_classify(
    profile: *const CusplabProfile,
    out: *mut CusplabRegime,
) -> CusplabStatus {
    guard(|| {
        let p = deref(profile, "profile")?;
        write_out(out, regime(classify(&p.0).map_err(lib)?), "out")
    })
}

/// Integrates the approach with added mass `m_f = ρ_f · law(ε)` from `ε*` down to `eps_stop`.
/// A bounded law needs a finite `coefficient` as its limit.
///
/// # Safety
/// `law` is readable and `out` is valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn cusplab_collide(
    m_s: f64,
    rho_f: f64,
    eps_star: f64,
    v0: f64,
    law: *const CusplabLaw,
    eps_stop: f64,
    rtol: f64,
    out: *mut *mut CusplabTrajectory,
) -> CusplabStatus {
    guard(|| {
        let l = *deref(law, "law")?;
        let model = match l.kind {
            CusplabLawKind::Power => AsymptoticModel::PowerLaw {
                coefficient: l.coefficient,
                exponent: l.exponent,
            },
            CusplabLawKind::Log => AsymptoticModel::LogLaw {
                coefficient: l.coefficient,
            },
            CusplabLawKind::Bounded => AsymptoticModel::Bounded {
                limit: l.coefficient.is_finite().then_some(l.coefficient),
            },
        };
        let setup = CollisionSetup::new(m_s, rho_f, eps_star, v0, MassModel::FromModel { model })
            .map_err(lib)?;
        let t = integrate_collision(&setup, eps_stop, rtol).map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(CusplabTrajectory(t))), "out")
    })
}

/// # Safety
/// `trajectory` is null or came from `cusplab_collide` and was not freed.
#[no_mangle]
pub unsafe extern "C" fn cusplab_trajectory_free(trajectory: *mut CusplabTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// Number of accepted samples, including the initial state.
///
/// # Safety
/// `trajectory` is a live handle and `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cusplab_trajectory_len(
    trajectory: *const CusplabTrajectory,
    out: *mut usize,
) -> CusplabStatus {
    guard(|| write_out(out, deref(trajectory, "trajectory")?.0.samples.len(), "out"))
}

/// # Safety
/// `trajectory` is a live handle and `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cusplab_trajectory_sample(
    trajectory: *const CusplabTrajectory,
    index: usize,
    out: *mut CusplabSample,
) -> CusplabStatus {
    guard(|| {
        let t = deref(trajectory, "trajectory")?;
        let s = t.0.samples.get(index).ok_or_else(|| {
            (
                CusplabStatus::InvalidArgument,
                format!(
                    "sample index {index} out of range (len {})",
                    t.0.samples.len()
                ),
            )
        })?;
        write_out(
            out,
            CusplabSample {
                t: s.t,
                epsilon: s.epsilon,
                velocity: s.v,
            },
            "out",
        )
    })
}

/// Touchdown time and speed; `NotConverged` when the stop gap was not reached.
///
/// # Safety
/// `trajectory` is a live handle; `time`, `speed` and `regime_out` are valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn cusplab_trajectory_touchdown(
    trajectory: *const CusplabTrajectory,
    time: *mut f64,
    speed: *mut f64,
    regime_out: *mut CusplabRegime,
) -> CusplabStatus {
    guard(|| {
        let t = &deref(trajectory, "trajectory")?.0;
        write_out(regime_out, regime(t.regime), "regime_out")?;
        let td = t.touchdown.ok_or_else(|| {
            (
                CusplabStatus::NotConverged,
                t.diagnostic
                    .clone()
                    .unwrap_or_else(|| "stop gap not reached".into()),
            )
        })?;
        write_out(time, td.time, "time")?;
        write_out(speed, td.speed, "speed")
    })
}
