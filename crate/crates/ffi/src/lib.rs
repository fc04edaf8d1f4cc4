//! C ABI over `berd-core`.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `*_new`/`*_load` function and released by the matching `*_free`. Calls
//! return a [`BerdStatus`]; on failure [`berd_last_error`] describes the
//! cause for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64;

use berd_core::channel::{load_frame_file, ReceivedFrame};
use berd_core::harness::{self, Benchmark, MetricRow, Scenario};
use berd_core::receiver::{receive, Mode, ReceiverConfig, ReceiverOutput};
use berd_core::BerdError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BerdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Infeasible = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

/// Simulation scenario.
pub struct BerdScenario(Scenario);

/// Received samples of one frame, one row per receiver.
pub struct BerdFrame(ReceivedFrame);

/// Receiver configuration: candidate grid, iteration limits and mode.
pub struct BerdReceiver(ReceiverConfig);

/// Receiver output for one frame.
pub struct BerdDecision(ReceiverOutput);

/// Rows of an SNR sweep.
pub struct BerdMetrics(Vec<MetricRow>);

/// One SNR point of a sweep.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerdMetricRow {
    pub snr_db: f64,
    pub ber: f64,
    pub pcc_mcs: f64,
    pub pcc_mod: f64,
    pub pcc_code: f64,
    /// NaN when no trial produced an estimate.
    pub mse_channel: f64,
    pub mse_noise: f64,
    pub mean_outer_iters: f64,
    pub trials: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &BerdError) -> BerdStatus {
    match err {
        BerdError::Parse { .. } | BerdError::UnknownModulation(_) | BerdError::UnknownCode(_) => {
            BerdStatus::Parse
        }
        BerdError::Io { .. } => BerdStatus::Io,
        BerdError::Infeasible(_) | BerdError::NoFeasibleHypothesis => BerdStatus::Infeasible,
        _ => BerdStatus::InvalidArgument,
    }
}

struct Failure(BerdStatus, String);

impl From<BerdError> for Failure {
    fn from(e: BerdError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(BerdStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(BerdStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records its error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BerdStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BerdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            BerdStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn obj_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Copies `src` into a caller buffer of `cap` elements and reports the full
/// length through `len`. Fails with `BufferTooSmall` when it does not fit.
unsafe fn copy_out<T: Copy>(
    src: &[T],
    buf: *mut T,
    cap: usize,
    len: *mut usize,
) -> Result<(), Failure> {
    if !len.is_null() {
        *len = src.len();
    }
    if src.len() > cap {
        return Err(Failure(
            BerdStatus::BufferTooSmall,
            format!("need {} elements, buffer holds {cap}", src.len()),
        ));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn berd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn berd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a scenario with the default settings.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn berd_scenario_new(out: *mut *mut BerdScenario) -> BerdStatus {
    guard(|| put(out, BerdScenario(Scenario::default())))
}

/// Parses a scenario from `key = value` text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn berd_scenario_parse(
    text: *const c_char,
    out: *mut *mut BerdScenario,
) -> BerdStatus {
    guard(|| {
        let s = Scenario::parse(str_arg(text, "text")?)?;
        s.validate()?;
        put(out, BerdScenario(s))
    })
}

/// Reads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn berd_scenario_load(
    path: *const c_char,
    out: *mut *mut BerdScenario,
) -> BerdStatus {
    guard(|| {
        let s = Scenario::from_file(Path::new(str_arg(path, "path")?))?;
        s.validate()?;
        put(out, BerdScenario(s))
    })
}

/// Sets the master seed.
///
/// # Safety
/// `scenario` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn berd_scenario_set_seed(
    scenario: *mut BerdScenario,
    seed: u64,
) -> BerdStatus {
    guard(|| {
        obj_mut(scenario, "scenario")?.0.seed = seed;
        Ok(())
    })
}

/// Sets the number of trials per SNR point.
///
/// # Safety
/// `scenario` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn berd_scenario_set_trials(
    scenario: *mut BerdScenario,
    trials: usize,
) -> BerdStatus {
    guard(|| {
        if trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        obj_mut(scenario, "scenario")?.0.trials = trials;
        Ok(())
    })
}

/// Sets the receiver mode: `single`, `cooperative` or `distributed`.
///
/// # Safety
/// `scenario` must come from this library; `mode` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn berd_scenario_set_mode(
    scenario: *mut BerdScenario,
    mode: *const c_char,
) -> BerdStatus {
    guard(|| {
        let mode: Mode = str_arg(mode, "mode")?.parse()?;
        obj_mut(scenario, "scenario")?.0.mode = mode;
        Ok(())
    })
}

/// Writes the scenario as `key = value` text into `buf` (NUL included).
/// `len` receives the required size in bytes including the NUL.
///
/// # Safety
/// `scenario` must come from this library; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn berd_scenario_to_text(
    scenario: *const BerdScenario,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> BerdStatus {
    guard(|| {
        let text = CString::new(obj(scenario, "scenario")?.0.to_text())
            .map_err(|e| invalid(e.to_string()))?;
        copy_out(text.as_bytes_with_nul(), buf.cast(), cap, len)
    })
}

/// # Safety
/// `scenario` must be NULL or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn berd_scenario_free(scenario: *mut BerdScenario) {
    free(scenario);
}

/// Runs the blind receiver sweep of the scenario.
///
/// # Safety
/// `scenario` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn berd_sweep(
    scenario: *const BerdScenario,
    out: *mut *mut BerdMetrics,
) -> BerdStatus {
    guard(|| {
        let rows = harness::run_scenario(&obj(scenario, "scenario")?.0)?;
        put(out, BerdMetrics(rows))
    })
}

/// Runs one benchmark receiver (`perfect_csi`, `perfect_csi_true_theta`,
/// `zf` or `lmmse`) over the scenario's trials.
///
/// # Safety
/// `scenario` must come from this library; `name` must be NUL-terminated;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn berd_benchmark(
    scenario: *const BerdScenario,
    name: *const c_char,
    out: *mut *mut BerdMetrics,
) -> BerdStatus {
    guard(|| {
        let bench: Benchmark = str_arg(name, "name")?.parse()?;
        let s = Scenario {
            benchmarks: vec![bench],
            ..obj(scenario, "scenario")?.0.clone()
        };
        let rows = harness::run_benchmarks(&s)?
            .pop()
            .map(|(_, r)| r)
            .unwrap_or_default();
        put(out, BerdMetrics(rows))
    })
}

/// Number of SNR points.
///
/// # Safety
/// `metrics` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn berd_metrics_len(metrics: *const BerdMetrics) -> usize {
    metrics.as_ref().map_or(0, |m| m.0.len())
}

/// Copies row `index` into `row`.
///
/// # Safety
/// `metrics` must come from this library; `row` must be writable.
#[no_mangle]
pub unsafe extern "C" fn berd_metrics_get(
    metrics: *const BerdMetrics,
    index: usize,
    row: *mut BerdMetricRow,
) -> BerdStatus {
    guard(|| {
        let m = obj(metrics, "metrics")?;
        let r =
            m.0.get(index)
                .ok_or_else(|| invalid(format!("row {index} of {}", m.0.len())))?;
        let row = obj_mut(row, "row")?;
        *row = BerdMetricRow {
            snr_db: r.snr_db,
            ber: r.ber,
            pcc_mcs: r.pcc_mcs,
            pcc_mod: r.pcc_mod,
            pcc_code: r.pcc_code,
            mse_channel: r.mse_channel,
            mse_noise: r.mse_noise,
            mean_outer_iters: r.mean_outer_iters,
            trials: r.trials,
        };
        Ok(())
    })
}

/// Writes the rows as CSV.
///
/// # Safety
/// `metrics` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn berd_metrics_write_csv(
    metrics: *const BerdMetrics,
    path: *const c_char,
) -> BerdStatus {
    guard(|| {
        let m = obj(metrics, "metrics")?;
        harness::emit_csv(&m.0, Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `metrics` must be NULL or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn berd_metrics_free(metrics: *mut BerdMetrics) {
    free(metrics);
}

/// Builds a frame from `n_receivers * n_symbols` complex samples stored as
/// interleaved `re, im` pairs, receiver-major.
///
/// # Safety
/// `samples` must point to `2 * n_receivers * n_symbols` doubles; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn berd_frame_new(
    samples: *const f64,
    n_receivers: usize,
    n_symbols: usize,
    out: *mut *mut BerdFrame,
) -> BerdStatus {
    guard(|| {
        if samples.is_null() {
            return Err(null("samples"));
        }
        let total = n_receivers
            .checked_mul(n_symbols)
            .and_then(|n| n.checked_mul(2))
            .ok_or_else(|| invalid("frame size overflows"))?;
        if total == 0 {
            return Err(invalid("empty frame"));
        }
        let flat = std::slice::from_raw_parts(samples, total);
        let rows = flat
            .chunks_exact(2 * n_symbols)
            .map(|row| {
                row.chunks_exact(2)
                    .map(|c| Complex64::new(c[0], c[1]))
                    .collect()
            })
            .collect();
        put(out, BerdFrame(ReceivedFrame::new(rows)?))
    })
}

/// Reads a frame dump file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn berd_frame_load(
    path: *const c_char,
    out: *mut *mut BerdFrame,
) -> BerdStatus {
    guard(|| {
        let frame = load_frame_file(Path::new(str_arg(path, "path")?))?;
        put(out, BerdFrame(frame))
    })
}

/// # Safety
/// `frame` must be NULL or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn berd_frame_free(frame: *mut BerdFrame) {
    free(frame);
}

/// Receiver configured from the scenario's candidate grid and limits.
///
/// # Safety
/// `scenario` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn berd_receiver_new(
    scenario: *const BerdScenario,
    out: *mut *mut BerdReceiver,
) -> BerdStatus {
    guard(|| {
        let s = &obj(scenario, "scenario")?.0;
        let config = s.receiver_config(s.grid()?)?;
        config.validate()?;
        put(out, BerdReceiver(config))
    })
}

/// Seed of the receiver's initialiser streams.
///
/// # Safety
/// `receiver` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn berd_receiver_set_seed(
    receiver: *mut BerdReceiver,
    seed: u64,
) -> BerdStatus {
    guard(|| {
        obj_mut(receiver, "receiver")?.0.init_seed = seed;
        Ok(())
    })
}

/// # Safety
/// `receiver` must be NULL or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn berd_receiver_free(receiver: *mut BerdReceiver) {
    free(receiver);
}

/// Estimates, recognises and detects one frame.
///
/// # Safety
/// `receiver` and `frame` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn berd_receive(
    receiver: *const BerdReceiver,
    frame: *const BerdFrame,
    out: *mut *mut BerdDecision,
) -> BerdStatus {
    guard(|| {
        let config = &obj(receiver, "receiver")?.0;
        let output = receive(&obj(frame, "frame")?.0, config)?;
        put(out, BerdDecision(output))
    })
}

/// Decided MCS as `modulation/code`, NUL-terminated. `len` receives the
/// required size in bytes including the NUL.
///
/// # Safety
/// `decision` must come from this library; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn berd_decision_theta(
    decision: *const BerdDecision,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> BerdStatus {
    guard(|| {
        let theta = obj(decision, "decision")?.0.decision.theta_hat.to_string();
        let text = CString::new(theta).map_err(|e| invalid(e.to_string()))?;
        copy_out(text.as_bytes_with_nul(), buf.cast(), cap, len)
    })
}

/// Decided message bits, one `0`/`1` byte each.
///
/// # Safety
/// `decision` must come from this library; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn berd_decision_bits(
    decision: *const BerdDecision,
    buf: *mut u8,
    cap: usize,
    len: *mut usize,
) -> BerdStatus {
    guard(|| {
        copy_out(
            &obj(decision, "decision")?.0.decision.bits_hat,
            buf,
            cap,
            len,
        )
    })
}

/// Estimated taps of receiver `k` as interleaved `re, im` pairs and its
/// noise power. `len` receives the number of taps.
///
/// # Safety
/// `decision` must come from this library; `taps` must hold `2 * cap`
/// doubles; `noise_power` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn berd_decision_channel(
    decision: *const BerdDecision,
    k: usize,
    taps: *mut f64,
    cap: usize,
    len: *mut usize,
    noise_power: *mut f64,
) -> BerdStatus {
    guard(|| {
        let betas = &obj(decision, "decision")?.0.decision.beta_hat;
        let beta = betas
            .get(k)
            .ok_or_else(|| invalid(format!("receiver {k} of {}", betas.len())))?;
        let flat: Vec<f64> = beta.taps().iter().flat_map(|h| [h.re, h.im]).collect();
        if !len.is_null() {
            *len = flat.len() / 2;
        }
        copy_out(&flat, taps, 2 * cap, ptr::null_mut())?;
        if !noise_power.is_null() {
            *noise_power = beta.noise_power;
        }
        Ok(())
    })
}

/// Number of receivers in the decision.
///
/// # Safety
/// `decision` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn berd_decision_receivers(decision: *const BerdDecision) -> usize {
    decision.as_ref().map_or(0, |d| d.0.decision.beta_hat.len())
}

/// Outer iterations run by the winning hypothesis.
///
/// # Safety
/// `decision` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn berd_decision_outer_iterations(decision: *const BerdDecision) -> usize {
    decision
        .as_ref()
        .map_or(0, |d| d.0.winner().outer_iterations)
}

/// # Safety
/// `decision` must be NULL or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn berd_decision_free(decision: *mut BerdDecision) {
    free(decision);
}
