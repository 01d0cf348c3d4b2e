//! C ABI for the smoothing-averse library.
//!
//! Models and policies cross the boundary as opaque handles created by a
//! `*_from_json` or `*_load` call and released with the matching `*_free`.
//! Every fallible function returns an [`SaStatus`]; on failure a message is
//! available from [`sa_last_error_message`] on the same thread. Results are
//! written through caller-provided out-pointers and only on success. Panics
//! never unwind into C: they are caught and reported as
//! [`SaStatus::Panic`].
//!
//! Beliefs are passed as `n_states` contiguous doubles. Transition and
//! covariance matrices follow the JSON layout of the core library.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::Matrix3;
use smoothing_averse::belief::discrete_entropy;
use smoothing_averse::dp::{policy_lookup, PolicyArtifact, SimplexGrid};
use smoothing_averse::robot::gaussian_entropy;
use smoothing_averse::smoother::{exact_smoother_entropy_enumeration, stage_reward_tilde};
use smoothing_averse::{Belief, ControlledHmm, Error, Observation};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed model, belief, index or length.
    InvalidArgument = 2,
    /// Argument outside the domain of the operation.
    Domain = 3,
    /// Every likelihood vanished at the given observation.
    Degenerate = 4,
    /// A size guard refused the instance.
    Guard = 5,
    /// Unparseable JSON or an unreadable file.
    Parse = 6,
    Numerical = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

/// Kind tag of [`SaObservation`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaObservationKind {
    Symbol = 0,
    Scalar = 1,
}

/// A measurement: `symbol` is read for discrete models, `value` for
/// scalar Gaussian ones.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaObservation {
    pub kind: SaObservationKind,
    pub symbol: usize,
    pub value: f64,
}

impl SaObservation {
    fn to_core(self) -> Observation {
        match self.kind {
            SaObservationKind::Symbol => Observation::Symbol(self.symbol),
            SaObservationKind::Scalar => Observation::Scalar(self.value),
        }
    }
}

/// Entropy terms of one filter step, in nats.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SaStageReward {
    pub h_post: f64,
    pub h_pred: f64,
    pub h_trans: f64,
    pub r_tilde: f64,
}

/// Opaque controlled hidden Markov model.
pub struct SaHmm(ControlledHmm);

/// Opaque solved grid policy.
pub struct SaPolicy {
    artifact: PolicyArtifact,
    grid: SimplexGrid,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(SaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Domain(_) => SaStatus::Domain,
            Error::DegenerateMeasurement(_) => SaStatus::Degenerate,
            Error::SizeGuard { .. } => SaStatus::Guard,
            Error::Numerical(_) => SaStatus::Numerical,
            Error::Json(_) | Error::Csv(_) | Error::Io(_) => SaStatus::Parse,
            Error::InvalidModel(_) | Error::Consistency(_) | Error::Input(_) | Error::Config(_) => {
                SaStatus::InvalidArgument
            }
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn call<F>(f: F) -> SaStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            SaStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(SaStatus::InvalidArgument, format!("{what} is not UTF-8: {e}")))
}

unsafe fn belief_arg(hmm: &ControlledHmm, p: *const f64, n: usize) -> Result<Belief, Failure> {
    if n != hmm.n_states() {
        return Err(Failure(
            SaStatus::InvalidArgument,
            format!("belief has {n} entries, model has {} states", hmm.n_states()),
        ));
    }
    Ok(Belief::new(slice(p, n, "belief")?.to_vec())?)
}

/// Why the most recent call on this thread failed; empty after a
/// successful call. The pointer stays valid until the next call into this
/// library on the same thread.
#[no_mangle]
pub extern "C" fn sa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a model from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sa_hmm_from_json(json: *const c_char, out: *mut *mut SaHmm) -> SaStatus {
    call(|| {
        let out = out_ref(out, "out")?;
        let hmm = ControlledHmm::from_json(string(json, "json")?)?;
        *out = Box::into_raw(Box::new(SaHmm(hmm)));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `hmm` must come from [`sa_hmm_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sa_hmm_free(hmm: *mut SaHmm) {
    if !hmm.is_null() {
        drop(Box::from_raw(hmm));
    }
}

/// # Safety
/// `hmm` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sa_hmm_n_states(hmm: *const SaHmm, out: *mut usize) -> SaStatus {
    call(|| {
        *out_ref(out, "out")? = non_null(hmm, "hmm")?.0.n_states();
        Ok(())
    })
}

/// # Safety
/// `hmm` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sa_hmm_n_controls(hmm: *const SaHmm, out: *mut usize) -> SaStatus {
    call(|| {
        *out_ref(out, "out")? = non_null(hmm, "hmm")?.0.n_controls();
        Ok(())
    })
}

/// One filter step: predict `belief` under control `u`, then correct by
/// `y`. Writes `n_states` doubles to `out_belief`.
///
/// # Safety
/// `belief` and `out_belief` must each hold `n_states` doubles.
#[no_mangle]
pub unsafe extern "C" fn sa_filter_update(
    hmm: *const SaHmm,
    belief: *const f64,
    n_states: usize,
    u: usize,
    y: SaObservation,
    out_belief: *mut f64,
) -> SaStatus {
    call(|| {
        let hmm = &non_null(hmm, "hmm")?.0;
        let prior = belief_arg(hmm, belief, n_states)?;
        if out_belief.is_null() {
            return Err(null("out_belief"));
        }
        let post = hmm.filter_update(&prior, u, y.to_core())?;
        std::slice::from_raw_parts_mut(out_belief, n_states).copy_from_slice(post.probs());
        Ok(())
    })
}

/// Realised stage reward `h_post - h_pred + h_trans` of one filter step.
///
/// # Safety
/// `belief` must hold `n_states` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sa_stage_reward(
    hmm: *const SaHmm,
    belief: *const f64,
    n_states: usize,
    u: usize,
    y: SaObservation,
    out: *mut SaStageReward,
) -> SaStatus {
    call(|| {
        let hmm = &non_null(hmm, "hmm")?.0;
        let prior = belief_arg(hmm, belief, n_states)?;
        let out = out_ref(out, "out")?;
        let r = stage_reward_tilde(hmm, &prior, u, y.to_core())?;
        *out = SaStageReward { h_post: r.h_post, h_pred: r.h_pred, h_trans: r.h_trans, r_tilde: r.r_tilde };
        Ok(())
    })
}

/// Smoother entropy of an open-loop control sequence by exhaustive
/// enumeration. Discrete emissions only; large instances return
/// [`SaStatus::Guard`].
///
/// # Safety
/// `controls` must hold `n_controls` entries (it may be null when zero).
#[no_mangle]
pub unsafe extern "C" fn sa_smoother_entropy_enumeration(
    hmm: *const SaHmm,
    controls: *const usize,
    n_controls: usize,
    out: *mut f64,
) -> SaStatus {
    call(|| {
        let hmm = &non_null(hmm, "hmm")?.0;
        let controls = slice(controls, n_controls, "controls")?;
        if let Some(&u) = controls.iter().find(|&&u| u >= hmm.n_controls()) {
            return Err(Failure(SaStatus::InvalidArgument, format!("control index {u} out of range")));
        }
        let out = out_ref(out, "out")?;
        *out = exact_smoother_entropy_enumeration(hmm, controls)?;
        Ok(())
    })
}

/// Loads a policy artifact written by `smoothing-averse solve`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sa_policy_load(path: *const c_char, out: *mut *mut SaPolicy) -> SaStatus {
    call(|| {
        let out = out_ref(out, "out")?;
        let artifact = PolicyArtifact::load(Path::new(string(path, "path")?))?;
        let grid = artifact.grid()?;
        *out = Box::into_raw(Box::new(SaPolicy { artifact, grid }));
        Ok(())
    })
}

/// Releases a policy. Null is ignored.
///
/// # Safety
/// `policy` must come from [`sa_policy_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sa_policy_free(policy: *mut SaPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// # Safety
/// `policy` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sa_policy_horizon(policy: *const SaPolicy, out: *mut usize) -> SaStatus {
    call(|| {
        *out_ref(out, "out")? = non_null(policy, "policy")?.artifact.header.horizon;
        Ok(())
    })
}

/// Control chosen at time `t` for `belief`, via the nearest grid point.
///
/// # Safety
/// `belief` must hold `n_states` doubles and `out_control` be valid.
#[no_mangle]
pub unsafe extern "C" fn sa_policy_lookup(
    policy: *const SaPolicy,
    belief: *const f64,
    n_states: usize,
    t: usize,
    out_control: *mut usize,
) -> SaStatus {
    call(|| {
        let policy = non_null(policy, "policy")?;
        let b = Belief::new(slice(belief, n_states, "belief")?.to_vec())?;
        let out = out_ref(out_control, "out_control")?;
        *out = policy_lookup(&policy.artifact.policy, &policy.grid, &b, t)?;
        Ok(())
    })
}

/// Shannon entropy in nats of a probability vector.
///
/// # Safety
/// `probs` must hold `n` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sa_discrete_entropy(probs: *const f64, n: usize, out: *mut f64) -> SaStatus {
    call(|| {
        let b = Belief::new(slice(probs, n, "probs")?.to_vec())?;
        *out_ref(out, "out")? = discrete_entropy(&b);
        Ok(())
    })
}

/// Differential entropy in nats of a 3-dimensional Gaussian with the given
/// row-major covariance.
///
/// # Safety
/// `cov` must hold 9 doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sa_gaussian_entropy3(cov: *const f64, out: *mut f64) -> SaStatus {
    call(|| {
        let m = Matrix3::from_row_slice(slice(cov, 9, "cov")?);
        *out_ref(out, "out")? = gaussian_entropy(&m)?;
        Ok(())
    })
}
