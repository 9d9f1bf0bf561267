//! C ABI for rmtoolbox.
//!
//! Record sets are opaque handles created by `rm_record_set_new`,
//! `rm_record_set_load` or `rm_simulate_quench` and released with
//! `rm_record_set_free`. Every fallible call returns an `RmStatus`; on failure
//! `rm_last_error_message` describes the error for the calling thread.
//! Sites are 1-based and qubit 1 is the leftmost character of a bitstring.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use rmtoolbox::dynamics::QuenchConfig;
use rmtoolbox::estimator::{estimate_entropy, estimate_purity, mutual_information, EntropyFlag};
use rmtoolbox::io::{format_record, parse_record, read_records, write_records};
use rmtoolbox::qstate::SubsystemMask;
use rmtoolbox::sampler::{run_protocol, MeasurementRecord, ProtocolSpec};
use rmtoolbox::Error;

/// Status codes; the nonzero values match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Data = 4,
    Panic = 5,
}

/// Opaque collection of measurement records.
pub struct RmRecordSet {
    records: Vec<MeasurementRecord>,
}

/// A value with its jackknife standard error.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RmEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Parameters of a simulated Néel-state quench with uniform noise.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RmQuenchParams {
    pub n_qubits: usize,
    /// Nearest-neighbour coupling, s⁻¹.
    pub j0: f64,
    pub alpha: f64,
    /// Transverse field, rad/s.
    pub b_field: f64,
    /// Evolution times in seconds, sorted.
    pub times: *const f64,
    pub n_times: usize,
    /// Per-qubit preparation depolarizing strength (1 = none).
    pub lambda_prep: f64,
    /// Per-qubit measurement depolarizing strength (1 = none).
    pub lambda_meas: f64,
    pub n_unitaries: usize,
    pub n_shots: u64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(RmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            2 => RmStatus::InvalidArgument,
            3 => RmStatus::Io,
            _ => RmStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RmStatus::NullPointer, format!("{what} is NULL"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RmStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(RmStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn mask(sites: *const usize, n_sites: usize, what: &str) -> Result<SubsystemMask, Failure> {
    if sites.is_null() {
        return Err(null(what));
    }
    Ok(SubsystemMask::from_sites(std::slice::from_raw_parts(sites, n_sites))?)
}

unsafe fn set_ref<'a>(set: *const RmRecordSet) -> Result<&'a RmRecordSet, Failure> {
    set.as_ref().ok_or_else(|| null("record set"))
}

unsafe fn give(out: *mut *mut RmRecordSet, records: Vec<MeasurementRecord>) {
    *out = Box::into_raw(Box::new(RmRecordSet { records }));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a success.
///
/// The pointer stays valid until the next rmtoolbox call on the same thread.
#[no_mangle]
pub extern "C" fn rm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// New empty record set.
#[no_mangle]
pub extern "C" fn rm_record_set_new() -> *mut RmRecordSet {
    Box::into_raw(Box::new(RmRecordSet { records: Vec::new() }))
}

/// # Safety
/// `set` must be NULL or a handle returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn rm_record_set_free(set: *mut RmRecordSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Number of records; 0 for NULL.
///
/// # Safety
/// `set` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rm_record_set_len(set: *const RmRecordSet) -> usize {
    set.as_ref().map_or(0, |s| s.records.len())
}

/// Read a JSON Lines record file into a new handle stored in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rm_record_set_load(path: *const c_char, out: *mut *mut RmRecordSet) -> RmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = PathBuf::from(c_str(path, "path")?);
        give(out, read_records(&path)?);
        Ok(())
    })
}

/// Write all records as JSON Lines.
///
/// # Safety
/// `set` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rm_record_set_write(set: *const RmRecordSet, path: *const c_char) -> RmStatus {
    guard(|| {
        let set = set_ref(set)?;
        let path = PathBuf::from(c_str(path, "path")?);
        write_records(&path, &set.records)?;
        Ok(())
    })
}

/// Append one record given as a single JSON line.
///
/// # Safety
/// `set` must be a live handle and `line` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rm_record_set_push_json(set: *mut RmRecordSet, line: *const c_char) -> RmStatus {
    guard(|| {
        let set = set.as_mut().ok_or_else(|| null("record set"))?;
        let text = c_str(line, "line")?;
        let rec = parse_record(text, set.records.len() + 1)?;
        set.records.push(rec);
        Ok(())
    })
}

/// JSON line of record `index`, written to `buf` including the NUL terminator.
///
/// `*needed` receives the required buffer size; with `buf_len` smaller than
/// that the call fails with `RM_STATUS_INVALID_ARGUMENT` and writes nothing.
///
/// # Safety
/// `set` must be a live handle, `needed` writable, and `buf` writable for
/// `buf_len` bytes (or NULL when `buf_len` is 0).
#[no_mangle]
pub unsafe extern "C" fn rm_record_set_get_json(
    set: *const RmRecordSet,
    index: usize,
    buf: *mut c_char,
    buf_len: usize,
    needed: *mut usize,
) -> RmStatus {
    guard(|| {
        let set = set_ref(set)?;
        if needed.is_null() {
            return Err(null("needed"));
        }
        let rec = set.records.get(index).ok_or_else(|| {
            Failure(RmStatus::InvalidArgument, format!("index {index} out of range ({})", set.records.len()))
        })?;
        let line = format_record(rec);
        *needed = line.len() + 1;
        if buf.is_null() || buf_len < line.len() + 1 {
            return Err(Failure(RmStatus::InvalidArgument, format!("buffer needs {} bytes", line.len() + 1)));
        }
        ptr::copy_nonoverlapping(line.as_ptr(), buf.cast::<u8>(), line.len());
        *buf.add(line.len()) = 0;
        Ok(())
    })
}

/// New handle with the records taken at `time_s` (exact match).
///
/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_record_set_select_time(
    set: *const RmRecordSet,
    time_s: f64,
    out: *mut *mut RmRecordSet,
) -> RmStatus {
    guard(|| {
        let set = set_ref(set)?;
        if out.is_null() {
            return Err(null("out"));
        }
        give(out, set.records.iter().filter(|r| r.time_s == time_s).cloned().collect());
        Ok(())
    })
}

/// Purity of the subsystem given by `n_sites` 1-based site indices.
///
/// # Safety
/// `set` must be a live handle, `sites` readable for `n_sites` entries and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_estimate_purity(
    set: *const RmRecordSet,
    sites: *const usize,
    n_sites: usize,
    out: *mut RmEstimate,
) -> RmStatus {
    guard(|| {
        let set = set_ref(set)?;
        let m = mask(sites, n_sites, "sites")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let e = estimate_purity(&set.records, m)?;
        *out = RmEstimate { value: e.purity, std_error: e.stderr };
        Ok(())
    })
}

/// Second-order Rényi entropy in bits; fails with `RM_STATUS_DATA` when the
/// purity estimate is not positive.
///
/// # Safety
/// As for [`rm_estimate_purity`].
#[no_mangle]
pub unsafe extern "C" fn rm_estimate_entropy(
    set: *const RmRecordSet,
    sites: *const usize,
    n_sites: usize,
    out: *mut RmEstimate,
) -> RmStatus {
    guard(|| {
        let set = set_ref(set)?;
        let m = mask(sites, n_sites, "sites")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = estimate_purity(&set.records, m)?;
        let e = estimate_entropy(&p);
        match (e.flag, e.s2, e.stderr_s2) {
            (EntropyFlag::Ok, Some(v), Some(se)) => {
                *out = RmEstimate { value: v, std_error: se };
                Ok(())
            }
            _ => Err(Failure(RmStatus::Data, format!("purity estimate {} is not positive", p.purity))),
        }
    })
}

/// Rényi mutual information `S(A) + S(B) − S(AB)` of two disjoint subsystems.
///
/// # Safety
/// `set` must be a live handle, `a`/`b` readable for `n_a`/`n_b` entries and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_mutual_information(
    set: *const RmRecordSet,
    a: *const usize,
    n_a: usize,
    b: *const usize,
    n_b: usize,
    out: *mut RmEstimate,
) -> RmStatus {
    guard(|| {
        let set = set_ref(set)?;
        let (ma, mb) = (mask(a, n_a, "a")?, mask(b, n_b, "b")?);
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = mutual_information(&set.records, ma, mb)?;
        *out = RmEstimate { value: c.value, std_error: c.stderr };
        Ok(())
    })
}

/// Simulate randomized measurements after a Néel-state quench.
///
/// # Safety
/// `params` must be readable, `params->times` readable for `n_times` entries
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_simulate_quench(params: *const RmQuenchParams, out: *mut *mut RmRecordSet) -> RmStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if p.times.is_null() && p.n_times > 0 {
            return Err(null("times"));
        }
        let n = p.n_qubits;
        let mut q = QuenchConfig::new(n, p.j0, p.alpha);
        q.b_field = p.b_field;
        q.times = if p.n_times == 0 { Vec::new() } else { std::slice::from_raw_parts(p.times, p.n_times).to_vec() };
        q.noise.lambda_prep = vec![p.lambda_prep; n];
        q.noise.lambda_meas = vec![p.lambda_meas; n];
        q.master_seed = p.seed;
        let set = run_protocol(&q, &ProtocolSpec { n_unitaries: p.n_unitaries, n_shots: p.n_shots, patterns: vec![] })?;
        give(out, set.records);
        Ok(())
    })
}
