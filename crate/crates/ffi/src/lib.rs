//! C ABI over the `vsdp` equalizer.
//!
//! Every fallible call returns a `VsdpStatus`; the message for the most
//! recent failure on the calling thread is available from
//! `vsdp_last_error`. Handles are opaque and owned by the caller, who
//! releases them with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vsdp::sdp::SolverOptions;
use vsdp::uwb::{random_symbols, sample_channel, simulate_block, trial_rng, BlockConfig, ChannelPreset};
use vsdp::volterra::{demodulate_ml, demodulate_sdp, VolterraSystem};
use vsdp::{Error, SymMat};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VsdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    Infeasible = 5,
    /// An iterative routine stopped before meeting its tolerance. Outputs
    /// hold the last iterate.
    NoConvergence = 6,
    Parse = 7,
    Io = 8,
    Budget = 9,
    /// Output buffer shorter than the result.
    BufferTooSmall = 10,
    /// A Rust panic was caught at the boundary.
    Internal = 11,
}

/// A symbol-level model plus measurements for one block.
pub struct VsdpSystem {
    inner: VolterraSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> VsdpStatus {
    match e {
        Error::InvalidInput(_) => VsdpStatus::InvalidInput,
        Error::NonFinite(_) => VsdpStatus::NonFinite,
        Error::DimensionMismatch { .. } => VsdpStatus::DimensionMismatch,
        Error::Infeasible { .. } => VsdpStatus::Infeasible,
        Error::EigenNoConvergence { .. }
        | Error::DualNoConvergence { .. }
        | Error::SolveAborted { .. }
        | Error::Demod { .. }
        | Error::Lp(_) => VsdpStatus::NoConvergence,
        Error::Budget { .. } => VsdpStatus::Budget,
        Error::Parse { .. } => VsdpStatus::Parse,
        Error::Io(_) => VsdpStatus::Io,
    }
}

fn fail(e: Error) -> VsdpStatus {
    set_error(e.to_string());
    status_of(&e)
}

/// Runs `f`, turning panics into `VsdpStatus::Internal`.
fn guard(f: impl FnOnce() -> VsdpStatus) -> VsdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == VsdpStatus::Ok {
                set_error("");
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            VsdpStatus::Internal
        }
    }
}

fn null(what: &str) -> VsdpStatus {
    set_error(format!("{what} is null"));
    VsdpStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, VsdpStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        VsdpStatus::InvalidInput
    })
}

unsafe fn write_bits(d: &[i8], out: *mut i8, len: usize) -> VsdpStatus {
    if out.is_null() {
        return null("d_hat");
    }
    if len < d.len() {
        set_error(format!("d_hat holds {len} entries, {} needed", d.len()));
        return VsdpStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(d.as_ptr(), out, d.len());
    VsdpStatus::Ok
}

fn into_handle(sys: VolterraSystem, out: *mut *mut VsdpSystem) -> VsdpStatus {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(VsdpSystem { inner: sys })) };
    VsdpStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vsdp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn vsdp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a system from its text form.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vsdp_system_from_text(text: *const c_char, out: *mut *mut VsdpSystem) -> VsdpStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match VolterraSystem::from_text(text) {
            Ok(sys) => into_handle(sys, out),
            Err(e) => fail(e),
        }
    })
}

/// Loads a system file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vsdp_system_load(path: *const c_char, out: *mut *mut VsdpSystem) -> VsdpStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match VolterraSystem::load(path) {
            Ok(sys) => into_handle(sys, out),
            Err(e) => fail(e),
        }
    })
}

/// Simulates one block on a fresh channel draw with the default link
/// parameters. `ebn0_db = +inf` gives a noiseless block. The transmitted
/// symbols go to `d_true` (at least `nb` entries, may be null).
///
/// # Safety
/// `preset` must be a NUL-terminated string, `out` a valid pointer and
/// `d_true` either null or writable for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn vsdp_simulate(
    preset: *const c_char,
    ebn0_db: f64,
    seed: u64,
    trial: u64,
    d_true: *mut i8,
    len: usize,
    out: *mut *mut VsdpSystem,
) -> VsdpStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let preset = match str_arg(preset, "preset").map(ChannelPreset::from_name) {
            Ok(Ok(p)) => p,
            Ok(Err(e)) => return fail(e),
            Err(s) => return s,
        };
        let cfg = BlockConfig {
            ebn0_db,
            ..BlockConfig::default()
        };
        let mut rng = trial_rng(seed, trial);
        let channel = sample_channel(preset, &mut rng);
        let d = random_symbols(&mut rng, cfg.nb);
        let sys = match simulate_block(&cfg, &channel, &d, &mut rng).and_then(|b| b.system(&cfg)) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        if !d_true.is_null() {
            let bits: Vec<i8> = d.iter().map(|&x| x as i8).collect();
            let s = write_bits(&bits, d_true, len);
            if s != VsdpStatus::Ok {
                return s;
            }
        }
        into_handle(sys, out)
    })
}

/// Writes the text form into `buf` (NUL-terminated). `needed` receives the
/// full size including the terminator, so callers can size a second call.
///
/// # Safety
/// `sys` must be a live handle, `buf` writable for `cap` bytes (or null when
/// `cap` is 0) and `needed` null or valid.
#[no_mangle]
pub unsafe extern "C" fn vsdp_system_to_text(
    sys: *const VsdpSystem,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> VsdpStatus {
    guard(|| {
        let Some(sys) = sys.as_ref() else {
            return null("sys");
        };
        let text = sys.inner.to_text();
        let size = text.len() + 1;
        if !needed.is_null() {
            *needed = size;
        }
        if cap < size {
            set_error(format!("buffer holds {cap} bytes, {size} needed"));
            return VsdpStatus::BufferTooSmall;
        }
        if buf.is_null() {
            return null("buf");
        }
        ptr::copy_nonoverlapping(text.as_ptr().cast::<c_char>(), buf, text.len());
        *buf.add(text.len()) = 0;
        VsdpStatus::Ok
    })
}

/// Number of symbols per block; 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vsdp_system_nb(sys: *const VsdpSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inner.nb())
}

/// Number of correlator outputs per block; 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vsdp_system_nr(sys: *const VsdpSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inner.nr())
}

/// # Safety
/// `sys` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vsdp_system_free(sys: *mut VsdpSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Options for `vsdp_demod_sdp`. Zero fields select the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VsdpSolverOptions {
    pub gap_tol: f64,
    pub max_iter: usize,
}

/// Solver statistics from `vsdp_demod_sdp`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VsdpSolveInfo {
    pub iterations: usize,
    pub gap: f64,
    pub converged: bool,
}

/// SDP-relaxation detector. On `VsdpStatus::NoConvergence` the outputs
/// still hold the decisions from the last iterate.
///
/// # Safety
/// `sys` must be a live handle, `opts` and `info` null or valid, `d_hat`
/// writable for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn vsdp_demod_sdp(
    sys: *const VsdpSystem,
    opts: *const VsdpSolverOptions,
    d_hat: *mut i8,
    len: usize,
    info: *mut VsdpSolveInfo,
) -> VsdpStatus {
    guard(|| {
        let Some(sys) = sys.as_ref() else {
            return null("sys");
        };
        let o = opts.as_ref().copied().unwrap_or_default();
        if o.gap_tol < 0.0 || o.gap_tol.is_nan() {
            set_error("gap_tol must be non-negative");
            return VsdpStatus::InvalidInput;
        }
        let defaults = SolverOptions::default();
        let solver = SolverOptions {
            gap_tol: (o.gap_tol > 0.0).then_some(o.gap_tol),
            max_iter: if o.max_iter == 0 { defaults.max_iter } else { o.max_iter },
            ..defaults
        };
        let (res, status) = match demodulate_sdp(&sys.inner, &solver) {
            Ok(r) => (r, VsdpStatus::Ok),
            Err(Error::Demod { source, partial }) => (*partial, fail(*source)),
            Err(e) => return fail(e),
        };
        let s = write_bits(&res.d_hat, d_hat, len);
        if s != VsdpStatus::Ok {
            return s;
        }
        if !info.is_null() {
            *info = VsdpSolveInfo {
                iterations: res.iterations,
                gap: res.gap,
                converged: res.converged,
            };
        }
        status
    })
}

/// Exhaustive minimum-residual detector.
///
/// # Safety
/// `sys` must be a live handle, `d_hat` writable for `len` entries and
/// `residual` null or valid.
#[no_mangle]
pub unsafe extern "C" fn vsdp_demod_ml(
    sys: *const VsdpSystem,
    d_hat: *mut i8,
    len: usize,
    residual: *mut f64,
) -> VsdpStatus {
    guard(|| {
        let Some(sys) = sys.as_ref() else {
            return null("sys");
        };
        let (d, r) = match demodulate_ml(&sys.inner) {
            Ok(x) => x,
            Err(e) => return fail(e),
        };
        let s = write_bits(&d, d_hat, len);
        if s == VsdpStatus::Ok && !residual.is_null() {
            *residual = r;
        }
        s
    })
}

/// Smallest eigenvalue of the symmetric `n × n` row-major matrix `data`.
/// Asymmetric input is rejected.
///
/// # Safety
/// `data` must be readable for `n·n` doubles and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn vsdp_lambda_min(data: *const f64, n: usize, out: *mut f64) -> VsdpStatus {
    guard(|| {
        if data.is_null() {
            return null("data");
        }
        if out.is_null() {
            return null("out");
        }
        let Some(len) = n.checked_mul(n) else {
            set_error("n is too large");
            return VsdpStatus::InvalidInput;
        };
        let m = match SymMat::from_row_major(n, std::slice::from_raw_parts(data, len).to_vec()) {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        match m.lambda_min() {
            Ok(v) => {
                *out = v;
                VsdpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
