//! C ABI for PeerNomination.
//!
//! Assignments and profiles are opaque handles created and released through
//! this interface. Every fallible function returns a [`PnStatus`]; on failure
//! a description is available from [`pn_last_error`] on the same thread.
//! Agents are numbered from 1 as in the Rust crate.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use peer_nomination::analytic;
use peer_nomination::assignment::generate_assignment;
use peer_nomination::domain::truthful_profile;
use peer_nomination::noise::{project_profile, sample_full_rankings, MallowsParams};
use peer_nomination::{
    exact_selection_probabilities, run_peer_nomination, validate_assignment, Assignment, Error,
    Instance, Profile,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInstance = 2,
    InvalidParameter = 3,
    InvalidProfile = 4,
    Infeasible = 5,
    UnreachableTarget = 6,
    BufferTooSmall = 7,
    Panic = 8,
    Other = 9,
}

/// An m-regular review assignment.
pub struct PnAssignment {
    inner: Assignment,
    m: usize,
}

/// One complete ranking per reviewer over their pool.
pub struct PnProfile {
    inner: Profile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status_of(err: &Error) -> PnStatus {
    match err {
        Error::InvalidInstance(_) => PnStatus::InvalidInstance,
        Error::InvalidParameter(_) | Error::NonIntegralTotal { .. } => PnStatus::InvalidParameter,
        Error::InvalidProfile(_) | Error::Parse { .. } | Error::NotClusterRespecting { .. } => {
            PnStatus::InvalidProfile
        }
        Error::ClusteringInfeasible { .. } => PnStatus::Infeasible,
        Error::UnreachableTarget { .. } => PnStatus::UnreachableTarget,
        Error::Cell { source, .. } => status_of(source),
        _ => PnStatus::Other,
    }
}

/// Runs `body`, converting errors and panics into a status plus message.
fn guard(body: impl FnOnce() -> Result<(), (PnStatus, String)>) -> PnStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PnStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PnStatus::Panic
        }
    }
}

fn lib<T>(r: peer_nomination::Result<T>) -> Result<T, (PnStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (PnStatus, String) {
    (PnStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn get<'a, T>(p: *const T, name: &str) -> Result<&'a T, (PnStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out_slice<'a, T>(
    p: *mut T,
    len: usize,
    needed: usize,
    name: &str,
) -> Result<&'a mut [T], (PnStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    if len < needed {
        return Err((
            PnStatus::BufferTooSmall,
            format!("`{name}` holds {len} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn write_out<T>(p: *mut T, value: T, name: &str) -> Result<(), (PnStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    p.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Random m-regular assignment on `n` agents.
///
/// # Safety
/// `out` must be a valid pointer; the handle written there must be released
/// with [`pn_assignment_free`].
#[no_mangle]
pub unsafe extern "C" fn pn_assignment_generate(
    n: usize,
    m: usize,
    seed: u64,
    out: *mut *mut PnAssignment,
) -> PnStatus {
    guard(|| {
        let instance = lib(Instance::new(n, m, 1))?;
        let inner = lib(generate_assignment(&instance, seed))?;
        write_out(
            out,
            Box::into_raw(Box::new(PnAssignment { inner, m })),
            "out",
        )
    })
}

/// Assignment from `n * m` reviewee indices, reviewer by reviewer.
///
/// # Safety
/// `pools` must point to `n * m` readable values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pn_assignment_from_pools(
    n: usize,
    m: usize,
    pools: *const u32,
    out: *mut *mut PnAssignment,
) -> PnStatus {
    guard(|| {
        if pools.is_null() {
            return Err(null("pools"));
        }
        let instance = lib(Instance::new(n, m, 1))?;
        let flat = std::slice::from_raw_parts(pools, n * m);
        let inner = Assignment::from_pools(
            flat.chunks(m)
                .map(|c| c.iter().map(|&a| a as usize).collect())
                .collect(),
        );
        let report = validate_assignment(&instance, &inner);
        if !report.is_ok() {
            return Err((PnStatus::InvalidInstance, report.to_string()));
        }
        write_out(
            out,
            Box::into_raw(Box::new(PnAssignment { inner, m })),
            "out",
        )
    })
}

/// Copies the sorted pool of `reviewer` into `buf`.
///
/// # Safety
/// `assignment` must be a live handle and `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn pn_assignment_pool(
    assignment: *const PnAssignment,
    reviewer: usize,
    buf: *mut u32,
    len: usize,
) -> PnStatus {
    guard(|| {
        let a = get(assignment, "assignment")?;
        if reviewer == 0 || reviewer > a.inner.n() {
            return Err((
                PnStatus::InvalidParameter,
                format!("reviewer {reviewer} out of range"),
            ));
        }
        let dst = out_slice(buf, len, a.m, "buf")?;
        for (d, &s) in dst.iter_mut().zip(a.inner.pool(reviewer)) {
            *d = s as u32;
        }
        Ok(())
    })
}

/// # Safety
/// `assignment` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pn_assignment_free(assignment: *mut PnAssignment) {
    if !assignment.is_null() {
        drop(Box::from_raw(assignment));
    }
}

fn boxed_profile(inner: Profile, out: *mut *mut PnProfile) -> Result<(), (PnStatus, String)> {
    unsafe { write_out(out, Box::into_raw(Box::new(PnProfile { inner })), "out") }
}

/// Every reviewer ranks their pool by true rank (lower index first).
///
/// # Safety
/// `assignment` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pn_profile_truthful(
    assignment: *const PnAssignment,
    out: *mut *mut PnProfile,
) -> PnStatus {
    guard(|| boxed_profile(truthful_profile(&get(assignment, "assignment")?.inner), out))
}

/// Mallows-noisy reviews with dispersion `phi` in `[0, 1]`.
///
/// # Safety
/// `assignment` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pn_profile_mallows(
    assignment: *const PnAssignment,
    phi: f64,
    seed: u64,
    out: *mut *mut PnProfile,
) -> PnStatus {
    guard(|| {
        let a = get(assignment, "assignment")?;
        let params = lib(MallowsParams::new(phi))?;
        let full = sample_full_rankings(a.inner.n(), &params, seed);
        boxed_profile(lib(project_profile(&a.inner, &full))?, out)
    })
}

/// Profile from `n * m` reviewee indices, each reviewer's ranking best first.
///
/// # Safety
/// `rankings` must point to `n * m` readable values; other pointers as above.
#[no_mangle]
pub unsafe extern "C" fn pn_profile_from_rankings(
    assignment: *const PnAssignment,
    rankings: *const u32,
    out: *mut *mut PnProfile,
) -> PnStatus {
    guard(|| {
        let a = get(assignment, "assignment")?;
        if rankings.is_null() {
            return Err(null("rankings"));
        }
        let flat = std::slice::from_raw_parts(rankings, a.inner.n() * a.m);
        let rows = flat
            .chunks(a.m)
            .map(|c| c.iter().map(|&x| x as usize).collect())
            .collect();
        boxed_profile(lib(Profile::new(&a.inner, rows))?, out)
    })
}

/// # Safety
/// `profile` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pn_profile_free(profile: *mut PnProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Runs PeerNomination once. `accepted[j - 1]` is set to 1 when agent `j` is
/// selected and 0 otherwise; `size` receives the number selected.
///
/// # Safety
/// Handles must be live; `accepted` must hold `len >= n` bytes; `size` valid.
#[no_mangle]
pub unsafe extern "C" fn pn_run(
    assignment: *const PnAssignment,
    profile: *const PnProfile,
    k: usize,
    epsilon: f64,
    seed: u64,
    accepted: *mut u8,
    len: usize,
    size: *mut usize,
) -> PnStatus {
    guard(|| {
        let a = get(assignment, "assignment")?;
        let p = get(profile, "profile")?;
        let instance = lib(Instance::new(a.inner.n(), a.m, k))?;
        let result = lib(run_peer_nomination(
            &instance, &a.inner, &p.inner, epsilon, seed,
        ))?;
        let flags = out_slice(accepted, len, instance.n(), "accepted")?;
        for (j, flag) in flags.iter_mut().enumerate() {
            *flag = u8::from(result.is_accepted(j + 1));
        }
        write_out(size, result.size(), "size")
    })
}

/// Exact selection probability of every agent.
///
/// # Safety
/// Handles must be live and `probs` must hold `len >= n` values.
#[no_mangle]
pub unsafe extern "C" fn pn_exact_probabilities(
    assignment: *const PnAssignment,
    profile: *const PnProfile,
    k: usize,
    epsilon: f64,
    probs: *mut f64,
    len: usize,
) -> PnStatus {
    guard(|| {
        let a = get(assignment, "assignment")?;
        let p = get(profile, "profile")?;
        let instance = lib(Instance::new(a.inner.n(), a.m, k))?;
        let values = lib(exact_selection_probabilities(
            &instance, &a.inner, &p.inner, epsilon,
        ))?;
        out_slice(probs, len, values.len(), "probs")?.copy_from_slice(&values);
        Ok(())
    })
}

fn analytic_value(
    n: usize,
    m: usize,
    k: usize,
    out: *mut f64,
    f: impl FnOnce(&Instance) -> peer_nomination::Result<f64>,
) -> PnStatus {
    guard(|| {
        let instance = lib(Instance::new(n, m, k))?;
        let value = lib(f(&instance))?;
        unsafe { write_out(out, value, "out") }
    })
}

/// Analytic expected selection size under truthful reviews.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pn_expected_size(
    n: usize,
    m: usize,
    k: usize,
    epsilon: f64,
    out: *mut f64,
) -> PnStatus {
    analytic_value(n, m, k, out, |i| analytic::expected_size(i, epsilon))
}

/// Analytic expected recall of the true top `k`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pn_expected_recall(
    n: usize,
    m: usize,
    k: usize,
    epsilon: f64,
    out: *mut f64,
) -> PnStatus {
    analytic_value(n, m, k, out, |i| analytic::expected_recall(i, epsilon))
}

/// Analytic acceptance probability of the agent of true rank `r`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pn_acceptance_probability(
    n: usize,
    m: usize,
    k: usize,
    epsilon: f64,
    r: usize,
    out: *mut f64,
) -> PnStatus {
    analytic_value(n, m, k, out, |i| {
        analytic::acceptance_probability(i, epsilon, r)
    })
}

/// Slack whose analytic expected size is within `tolerance` of `target`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pn_calibrate_epsilon(
    n: usize,
    m: usize,
    k: usize,
    target: f64,
    tolerance: f64,
    out: *mut f64,
) -> PnStatus {
    analytic_value(n, m, k, out, |i| {
        analytic::calibrate_epsilon(i, target, tolerance)
    })
}
