#![allow(clippy::missing_safety_doc)]
//! C ABI over `plc_capacity`.
//!
//! Channels are opaque handles created by `plc_channel_new` or
//! `plc_channel_load` and released with `plc_channel_free`. Every fallible call
//! returns a `PlcStatus`; on failure `plc_last_error` gives a message for the
//! calling thread. Tables are passed row-major: `taps[n * memory + l]` is
//! `g[n, l]` and `noise[n * support + l]` is `c(n, l)` for `l >= 0`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use plc_capacity::channel::load_channel;
use plc_capacity::numerics::waterfill;
use plc_capacity::ofdm::{build_tf_grid, tf_ofdm_solution};
use plc_capacity::{
    capacity_thm1, capacity_thm1_converged, capacity_thm2, CapacityResult, ChannelInstance, CyclicAutocorrelation,
    Error, LptvFilter,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Noise covariance or spectrum not positive definite, or nothing to
    /// waterfill.
    Degenerate = 3,
    Io = 4,
    Panic = 5,
}

/// Opaque channel handle.
pub struct PlcChannel {
    inner: ChannelInstance,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PlcCapacity {
    pub rate: f64,
    pub raw_rate: f64,
    pub waterlevel: f64,
    /// Block count K or grid size J.
    pub block: usize,
    pub converged: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PlcChannelInfo {
    pub channel_period: usize,
    pub noise_period: usize,
    pub lcm: usize,
    pub memory: usize,
    pub k_min: usize,
    pub block: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> PlcStatus {
    match e {
        Error::Degenerate(_) => PlcStatus::Degenerate,
        Error::Io { .. } => PlcStatus::Io,
        Error::Parse { .. } | Error::InvalidParameter { .. } | Error::LengthMismatch(_) => PlcStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and panics.
fn guard(f: impl FnOnce() -> Result<(), (PlcStatus, String)>) -> PlcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PlcStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PlcStatus::Panic
        }
    }
}

fn lift(e: Error) -> (PlcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PlcStatus, String) {
    (PlcStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn table(data: *const f64, rows: usize, cols: usize, what: &str) -> Result<Vec<Vec<f64>>, (PlcStatus, String)> {
    if data.is_null() {
        return Err(null(what));
    }
    if rows == 0 || cols == 0 {
        return Err((
            PlcStatus::InvalidArgument,
            format!("`{what}` dimensions must be positive"),
        ));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| (PlcStatus::InvalidArgument, format!("`{what}` is too large")))?;
    let flat: &[f64] = std::slice::from_raw_parts(data, len);
    Ok(flat.chunks(cols).map(<[f64]>::to_vec).collect())
}

unsafe fn channel_ref<'a>(ch: *const PlcChannel) -> Result<&'a ChannelInstance, (PlcStatus, String)> {
    ch.as_ref().map(|c| &c.inner).ok_or_else(|| null("channel"))
}

fn write_capacity(out: *mut PlcCapacity, r: &CapacityResult) {
    // SAFETY: callers check `out` for null first.
    unsafe {
        *out = PlcCapacity {
            rate: r.rate,
            raw_rate: r.raw_rate,
            waterlevel: r.waterlevel,
            block: r.block,
            converged: r.converged,
        };
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn plc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn plc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

unsafe fn new_channel(
    filter: LptvFilter,
    noise: *const f64,
    noise_period: usize,
    noise_support: usize,
    out: *mut *mut PlcChannel,
) -> Result<(), (PlcStatus, String)> {
    let noise = CyclicAutocorrelation::from_rows(table(noise, noise_period, noise_support, "noise")?).map_err(lift)?;
    let handle = Box::new(PlcChannel {
        inner: ChannelInstance::new(filter, noise),
    });
    *out = Box::into_raw(handle);
    Ok(())
}

/// Creates a channel from a `period x memory` tap table and a
/// `noise_period x noise_support` autocorrelation table.
#[no_mangle]
pub unsafe extern "C" fn plc_channel_new(
    taps: *const f64,
    period: usize,
    memory: usize,
    noise: *const f64,
    noise_period: usize,
    noise_support: usize,
    out: *mut *mut PlcChannel,
) -> PlcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let filter = LptvFilter::from_rows(table(taps, period, memory, "taps")?).map_err(lift)?;
        new_channel(filter, noise, noise_period, noise_support, out)
    })
}

/// Like `plc_channel_new` with the taps read from a channel CSV file.
#[no_mangle]
pub unsafe extern "C" fn plc_channel_load(
    path: *const c_char,
    noise: *const f64,
    noise_period: usize,
    noise_support: usize,
    out: *mut *mut PlcChannel,
) -> PlcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (PlcStatus::InvalidArgument, "path is not valid UTF-8".to_string()))?;
        let filter = load_channel(Path::new(path)).map_err(lift)?;
        new_channel(filter, noise, noise_period, noise_support, out)
    })
}

/// Releases a handle; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn plc_channel_free(ch: *mut PlcChannel) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

#[no_mangle]
pub unsafe extern "C" fn plc_channel_info(ch: *const PlcChannel, out: *mut PlcChannelInfo) -> PlcStatus {
    guard(|| {
        let c = channel_ref(ch)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = PlcChannelInfo {
            channel_period: c.filter().period(),
            noise_period: c.noise().period(),
            lcm: c.lcm(),
            memory: c.memory(),
            k_min: c.k_min(),
            block: c.block(),
        };
        Ok(())
    })
}

/// Rate of the block of `k > K_min` joint periods.
#[no_mangle]
pub unsafe extern "C" fn plc_capacity_thm1(
    ch: *const PlcChannel,
    rho: f64,
    k: usize,
    out: *mut PlcCapacity,
) -> PlcStatus {
    guard(|| {
        let c = channel_ref(ch)?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_capacity(out, &capacity_thm1(c, rho, k).map_err(lift)?);
        Ok(())
    })
}

/// Limit over doubling block sizes up to `k_max`.
#[no_mangle]
pub unsafe extern "C" fn plc_capacity_thm1_converged(
    ch: *const PlcChannel,
    rho: f64,
    tol: f64,
    k_max: usize,
    out: *mut PlcCapacity,
) -> PlcStatus {
    guard(|| {
        let c = channel_ref(ch)?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_capacity(out, &capacity_thm1_converged(c, rho, tol, k_max).map_err(lift)?);
        Ok(())
    })
}

/// Spectral capacity on a uniform grid of `grid` frequencies.
#[no_mangle]
pub unsafe extern "C" fn plc_capacity_thm2(
    ch: *const PlcChannel,
    rho: f64,
    grid: usize,
    out: *mut PlcCapacity,
) -> PlcStatus {
    guard(|| {
        let c = channel_ref(ch)?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_capacity(out, &capacity_thm2(c, rho, grid).map_err(lift)?);
        Ok(())
    })
}

/// TF-OFDM baseline rate with `time_cells` cells and prefix `cyclic_prefix`.
#[no_mangle]
pub unsafe extern "C" fn plc_tf_ofdm_rate(
    ch: *const PlcChannel,
    rho: f64,
    time_cells: usize,
    cyclic_prefix: usize,
    rate: *mut f64,
) -> PlcStatus {
    guard(|| {
        let c = channel_ref(ch)?;
        let rate = rate.as_mut().ok_or_else(|| null("rate"))?;
        let grid = build_tf_grid(c, time_cells, cyclic_prefix).map_err(lift)?;
        *rate = tf_ofdm_solution(&grid, rho).map_err(lift)?.rate;
        Ok(())
    })
}

/// Waterfills `budget` over `n` eigenvalues; writes `n` powers and the level.
#[no_mangle]
pub unsafe extern "C" fn plc_waterfill(
    lambdas: *const f64,
    n: usize,
    budget: f64,
    powers: *mut f64,
    waterlevel: *mut f64,
) -> PlcStatus {
    guard(|| {
        if lambdas.is_null() {
            return Err(null("lambdas"));
        }
        if powers.is_null() {
            return Err(null("powers"));
        }
        let level = waterlevel.as_mut().ok_or_else(|| null("waterlevel"))?;
        let lambdas = std::slice::from_raw_parts(lambdas, n);
        let alloc = waterfill(lambdas, budget).map_err(lift)?;
        std::slice::from_raw_parts_mut(powers, n).copy_from_slice(&alloc.powers);
        *level = alloc.waterlevel;
        Ok(())
    })
}
