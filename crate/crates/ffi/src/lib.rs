//! C ABI for jcam-core.
//!
//! Every function returns a [`JcamStatus`]; results come back through out
//! parameters. Objects are opaque handles created by `jcam_*_new` style
//! functions and released with the matching `jcam_*_free`. After a non-OK
//! status, `jcam_last_error_message` describes the failure on the calling
//! thread.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use jcam_core::assignment::{
    brute_force_assignment, colocated_baseline, greedy_mode_assignment, random_mode_assignment, AssignmentResult,
};
use jcam_core::config::parse_system_config;
use jcam_core::experiment::run_verify;
use jcam_core::grouping::ApMode;
use jcam_core::scenario::{make_drop, LargeScaleState};
use jcam_core::{Error, SystemConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JcamStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Parse = 4,
    Domain = 5,
    TooLarge = 6,
    Io = 7,
    /// The call panicked; the handles it touched should be freed and not
    /// reused.
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JcamStrategy {
    Greedy = 0,
    Random = 1,
    BruteForce = 2,
    Colocated = 3,
}

/// System parameters.
pub struct JcamConfig(SystemConfig);

/// One network drop: node placement and large-scale fading.
pub struct JcamDrop {
    config: SystemConfig,
    seed: u64,
    ls: LargeScaleState,
}

/// Outcome of one assignment strategy on one drop.
pub struct JcamResult(AssignmentResult);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> JcamStatus {
    match e {
        Error::Domain(_) => JcamStatus::Domain,
        Error::InvalidConfig(_) | Error::MissingKey(_) => JcamStatus::InvalidConfig,
        Error::Parse { .. } | Error::State(_) => JcamStatus::Parse,
        Error::TooLarge(_) => JcamStatus::TooLarge,
        Error::Io { .. } => JcamStatus::Io,
    }
}

struct Fail(JcamStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(JcamStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> JcamStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            JcamStatus::Ok
        }
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
            set_error(format!("internal panic: {msg}"));
            JcamStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len - 1` bytes) and returns the full message
/// length in bytes, excluding the terminator. `buf` may be null to query
/// the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn jcam_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Default parameters for `m` APs with `n` antennas, `k` users and `u`
/// untrusted pairs.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jcam_config_new(
    m: usize,
    n: usize,
    k: usize,
    u: usize,
    out: *mut *mut JcamConfig,
) -> JcamStatus {
    guard(|| {
        let cfg = SystemConfig::new(m, n, k, u);
        cfg.validate()?;
        put(out, Box::into_raw(Box::new(JcamConfig(cfg))), "out")
    })
}

/// Parses `key = value` text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jcam_config_parse(text: *const c_char, out: *mut *mut JcamConfig) -> JcamStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| Fail(JcamStatus::InvalidArgument, "config text is not UTF-8".into()))?;
        let cfg = parse_system_config(text)?;
        put(out, Box::into_raw(Box::new(JcamConfig(cfg))), "out")
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn jcam_config_set_seed(config: *mut JcamConfig, seed: u64) -> JcamStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        c.0.seed = seed;
        Ok(())
    })
}

/// Minimum downlink SE (bits/s/Hz) the assignment strategies must keep.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn jcam_config_set_qos(config: *mut JcamConfig, qos_se: f64) -> JcamStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        if !(qos_se >= 0.0) {
            return Err(Fail(
                JcamStatus::InvalidArgument,
                format!("qos_se must be nonnegative, got {qos_se}"),
            ));
        }
        c.0.qos_se = qos_se;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jcam_config_free(config: *mut JcamConfig) {
    if !config.is_null() {
        drop_box(config);
    }
}

/// Places nodes and draws large-scale fading for drop `seed`.
///
/// # Safety
/// `config` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jcam_drop_new(config: *const JcamConfig, seed: u64, out: *mut *mut JcamDrop) -> JcamStatus {
    guard(|| {
        let cfg = get(config, "config")?.0.clone();
        let (_, ls) = make_drop(&cfg, seed)?;
        put(out, Box::into_raw(Box::new(JcamDrop { config: cfg, seed, ls })), "out")
    })
}

/// Large-scale gain from AP `m` to user `k`.
///
/// # Safety
/// `drop` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jcam_drop_beta_dl(drop: *const JcamDrop, m: usize, k: usize, out: *mut f64) -> JcamStatus {
    guard(|| {
        let d = get(drop, "drop")?;
        if m >= d.ls.beta_dl.nrows() || k >= d.ls.beta_dl.ncols() {
            return Err(Fail(
                JcamStatus::InvalidArgument,
                format!("index ({m}, {k}) out of range"),
            ));
        }
        put(out, d.ls.beta_dl[(m, k)], "out")
    })
}

/// # Safety
/// `drop` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jcam_drop_free(drop: *mut JcamDrop) {
    if !drop.is_null() {
        drop_box(drop);
    }
}

unsafe fn drop_box<T>(p: *mut T) {
    drop(Box::from_raw(p));
}

/// Runs an assignment strategy on `drop` under the drop's config. The
/// random and co-located strategies use the drop seed.
///
/// # Safety
/// `drop` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jcam_assign(
    drop: *const JcamDrop,
    strategy: JcamStrategy,
    out: *mut *mut JcamResult,
) -> JcamStatus {
    guard(|| {
        let d = get(drop, "drop")?;
        let r = match strategy {
            JcamStrategy::Greedy => greedy_mode_assignment(&d.ls, &d.config)?,
            JcamStrategy::Random => random_mode_assignment(&d.ls, &d.config, d.seed)?,
            JcamStrategy::BruteForce => brute_force_assignment(&d.ls, &d.config)?,
            JcamStrategy::Colocated => colocated_baseline(&d.config, d.seed)?.evaluate()?,
        };
        put(out, Box::into_raw(Box::new(JcamResult(r))), "out")
    })
}

/// Minimum downlink SE and minimum MSP of the assignment.
///
/// # Safety
/// `result` must be a live handle; the out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn jcam_result_objectives(
    result: *const JcamResult,
    min_se: *mut f64,
    min_msp: *mut f64,
) -> JcamStatus {
    guard(|| {
        let r = &get(result, "result")?.0;
        put(min_se, r.report.min_se, "min_se")?;
        put(min_msp, r.report.min_msp, "min_msp")
    })
}

/// Accepted moves, scored candidates and whether the QoS floor holds.
///
/// # Safety
/// `result` must be a live handle; the out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn jcam_result_counters(
    result: *const JcamResult,
    iterations: *mut usize,
    candidate_evaluations: *mut usize,
    feasible: *mut bool,
) -> JcamStatus {
    guard(|| {
        let r = &get(result, "result")?.0;
        put(iterations, r.iterations, "iterations")?;
        put(candidate_evaluations, r.candidate_evaluations, "candidate_evaluations")?;
        put(feasible, r.feasible, "feasible")
    })
}

/// Writes the mode indicators (1 downlink, 0 monitoring) into `modes`,
/// which holds `len` entries, and the AP count into `num_aps`. With
/// `len` smaller than the AP count nothing is written to `modes` and the
/// status is `InvalidArgument`.
///
/// # Safety
/// `result` must be a live handle; `modes` null or `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn jcam_result_modes(
    result: *const JcamResult,
    modes: *mut u8,
    len: usize,
    num_aps: *mut usize,
) -> JcamStatus {
    guard(|| {
        let a = &get(result, "result")?.0.assignment;
        put(num_aps, a.len(), "num_aps")?;
        if modes.is_null() {
            return Err(null("modes"));
        }
        if len < a.len() {
            return Err(Fail(
                JcamStatus::InvalidArgument,
                format!("buffer holds {len} entries, {} needed", a.len()),
            ));
        }
        for m in 0..a.len() {
            *modes.add(m) = u8::from(a.mode(m) == ApMode::Downlink);
        }
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jcam_result_free(result: *mut JcamResult) {
    if !result.is_null() {
        drop_box(result);
    }
}

/// Closed-form vs Monte Carlo check on the config's first drop. `passed`
/// is false if any mandatory term misses `tol`; `failed_terms` counts all
/// terms outside `tol`, report-only ones included.
///
/// # Safety
/// `config` must be a live handle; the out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn jcam_verify(
    config: *const JcamConfig,
    trials: usize,
    tol: f64,
    passed: *mut bool,
    failed_terms: *mut usize,
) -> JcamStatus {
    guard(|| {
        let cfg = &get(config, "config")?.0;
        let report = run_verify(cfg, trials, tol)?;
        put(passed, report.passed(), "passed")?;
        put(failed_terms, report.discrepancies().count(), "failed_terms")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, JcamStatus::Panic);
        let mut buf = [0 as c_char; 64];
        let n = unsafe { jcam_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(n, msg.len());
        assert!(msg.contains("boom"));
    }

    #[test]
    fn truncates_to_buffer() {
        set_error("abcdef".into());
        let mut buf = [1 as c_char; 4];
        let n = unsafe { jcam_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert_eq!(n, 6);
        assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_bytes(), b"abc");
        assert_eq!(unsafe { jcam_last_error_message(ptr::null_mut(), 0) }, 6);
    }
}
