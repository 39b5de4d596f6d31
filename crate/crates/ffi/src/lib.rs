//! C ABI over `ldp-erm`.
//!
//! Every entry point returns an [`LdpStatus`]. On anything but
//! `LDP_STATUS_OK` a message is stored for the calling thread and can be read
//! with [`ldp_last_error_message`]. Releases are handed out as opaque heap
//! handles that the caller frees with the matching `*_free` function.
//! Panics never cross the boundary; they surface as `LDP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ldp_erm::bernstein_erm::{
    run_grid_mechanism, Constraint, CubeDataset, GridMode, GridProtocolConfig,
};
use ldp_erm::data::{BallDataset, BinaryDataset, BoxDataset, Records};
use ldp_erm::glm::{glm_erm_run, Flavor, GlmConfig, ScalarLoss, ShiftSampling};
use ldp_erm::harness::config::CubeLossKind;
use ldp_erm::harness::{run_experiment, write_outputs, ExperimentConfig};
use ldp_erm::primitives::{self, PlayerValue, Privacy, PrivacyBudget};
use ldp_erm::query::{
    gaussian_kernel, marginals_release, smooth_release, MarginalCoefficientTable, MarginalEncoding,
    SmoothRelease, DEFAULT_TABLE_CAP,
};
use ldp_erm::rng::{tag, SeedStream};
use ldp_erm::LdpError;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parameter = 3,
    Estimation = 4,
    Config = 5,
    Protocol = 6,
    QueryClass = 7,
    Degenerate = 8,
    Io = 9,
    Panic = 10,
}

/// Privacy setting. With `disabled` set the exact non-private value is
/// computed and the other fields are ignored.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LdpPrivacy {
    pub epsilon: f64,
    pub delta: f64,
    pub disabled: bool,
}

/// Opaque marginal release.
pub struct LdpMarginals {
    table: MarginalCoefficientTable,
}

/// Opaque smooth-query release.
pub struct LdpSmooth {
    release: SmoothRelease,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &LdpError) -> LdpStatus {
    match e {
        LdpError::Parameter(_) => LdpStatus::Parameter,
        LdpError::Estimation(_) => LdpStatus::Estimation,
        LdpError::Config(_) => LdpStatus::Config,
        LdpError::Protocol(_) => LdpStatus::Protocol,
        LdpError::QueryClass(_) => LdpStatus::QueryClass,
        LdpError::Degenerate(_) => LdpStatus::Degenerate,
        LdpError::Io(_) | LdpError::Csv(_) | LdpError::Json(_) => LdpStatus::Io,
    }
}

/// Failure inside the wrapper, before or after the library call.
struct Fail(LdpStatus, String);

impl From<LdpError> for Fail {
    fn from(e: LdpError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LdpStatus::NullPointer, format!("{what} is NULL"))
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> LdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LdpStatus::Ok
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
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LdpStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn out<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn string<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Fail(LdpStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn privacy_of(p: LdpPrivacy) -> Result<Privacy, Fail> {
    if p.disabled {
        Ok(Privacy::Disabled)
    } else {
        Ok(Privacy::Private(PrivacyBudget::new(p.epsilon, p.delta)?))
    }
}

fn checked_len(n: usize, p: usize) -> Result<usize, Fail> {
    n.checked_mul(p)
        .ok_or_else(|| Fail(LdpStatus::Parameter, "n * p overflows".into()))
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ldp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ldp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Scalar Laplace average of `n` values in `[0, bound]`.
///
/// # Safety
/// `values` must point to `n` readable doubles and `out_mean` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn ldp_avg_1d(
    values: *const f64,
    n: usize,
    bound: f64,
    epsilon: f64,
    seed: u64,
    out_mean: *mut f64,
) -> LdpStatus {
    guard(|| {
        let values = slice(values, n, "values")?;
        let out_mean = out(out_mean, "out_mean")?;
        let players = values
            .iter()
            .map(|&v| PlayerValue::new(v, bound))
            .collect::<Result<Vec<_>, _>>()?;
        let budget = PrivacyBudget::pure(epsilon)?;
        *out_mean = primitives::ldp_avg_1d(
            &players,
            &budget,
            &mut SeedStream::new(seed).rng(tag::PLAYER, 0),
        )?;
        Ok(())
    })
}

/// Private grid mechanism on `[0,1]^p` with the loss `|w - x|^2 / p`
/// (`loss = 0`) or `|w - x|_1 / p` (`loss = 1`). `one_bit` selects the
/// one-bit protocol, which needs `epsilon <= ln 2`. Writes the `p` coordinates
/// of the private minimizer to `w_out`.
///
/// # Safety
/// `records` must point to `n * p` doubles in row-major order and `w_out` to
/// `p` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ldp_grid_erm(
    records: *const f64,
    n: usize,
    p: usize,
    loss: u32,
    k: usize,
    h: usize,
    privacy: LdpPrivacy,
    one_bit: bool,
    seed: u64,
    w_out: *mut f64,
) -> LdpStatus {
    guard(|| {
        let rows = slice(records, checked_len(n, p)?, "records")?;
        let w_out = slice_mut(w_out, p, "w_out")?;
        let kind = match loss {
            0 => CubeLossKind::Quadratic,
            1 => CubeLossKind::Absolute,
            other => {
                return Err(Fail(
                    LdpStatus::Parameter,
                    format!("unknown loss code {other}"),
                ))
            }
        };
        let data = CubeDataset::new(Records::new(p, rows.to_vec())?, p, move |w, x| {
            kind.value(w, x)
        })?;
        let mode = if one_bit {
            GridMode::OneBit
        } else {
            GridMode::LaplacePerPoint
        };
        let cfg = GridProtocolConfig::new(k, h, privacy_of(privacy)?, mode);
        let run = run_grid_mechanism(
            &data,
            &cfg,
            &Constraint::unit_cube(p),
            &SeedStream::new(seed),
        )?;
        w_out.copy_from_slice(&run.w_priv);
        Ok(())
    })
}

/// Private linear-model ERM over the ball of `radius`. `loss` is 0 for the
/// dedicated hinge path, or 1 (hinge), 2 (absolute), 3 (logistic),
/// 4 (half square) through the general path. Labels must be `+1` or `-1`.
///
/// # Safety
/// `features` must point to `n * p` doubles, `labels` to `n` doubles and
/// `w_out` to `p` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ldp_glm_erm(
    features: *const f64,
    labels: *const f64,
    n: usize,
    p: usize,
    loss: u32,
    beta_smoothing: f64,
    d: usize,
    radius: f64,
    privacy: LdpPrivacy,
    seed: u64,
    w_out: *mut f64,
) -> LdpStatus {
    guard(|| {
        let xs = slice(features, checked_len(n, p)?, "features")?;
        let ys = slice(labels, n, "labels")?;
        let w_out = slice_mut(w_out, p, "w_out")?;
        let general = |loss| Flavor::GeneralLinear {
            loss,
            shift: ShiftSampling::Shared,
        };
        let flavor = match loss {
            0 => Flavor::Hinge,
            1 => general(ScalarLoss::Hinge),
            2 => general(ScalarLoss::Absolute),
            3 => general(ScalarLoss::Logistic),
            4 => general(ScalarLoss::HalfSquare),
            other => {
                return Err(Fail(
                    LdpStatus::Parameter,
                    format!("unknown loss code {other}"),
                ))
            }
        };
        let data = BallDataset::new(Records::new(p, xs.to_vec())?, ys.to_vec())?;
        let cfg = GlmConfig {
            flavor,
            beta_smoothing,
            d,
            privacy: privacy_of(privacy)?,
            iterations: None,
            radius,
        };
        let run = glm_erm_run(&data, &cfg, &SeedStream::new(seed))?;
        w_out.copy_from_slice(&run.w);
        Ok(())
    })
}

/// Releases the table for all disjunctions of at most `k` of the `p`
/// attributes. `bits` holds `n * p` bytes, each 0 or 1.
///
/// # Safety
/// `bits` must point to `n * p` readable bytes and `out_handle` to a
/// writable handle slot. Free the handle with [`ldp_marginals_free`].
#[no_mangle]
pub unsafe extern "C" fn ldp_marginals_release(
    bits: *const u8,
    n: usize,
    p: usize,
    k: usize,
    gamma: f64,
    privacy: LdpPrivacy,
    seed: u64,
    out_handle: *mut *mut LdpMarginals,
) -> LdpStatus {
    guard(|| {
        let bits = slice(bits, checked_len(n, p)?, "bits")?;
        let out_handle = out(out_handle, "out_handle")?;
        let data = BinaryDataset::new(p, bits.to_vec())?;
        let table = marginals_release(
            &data,
            k,
            gamma,
            &privacy_of(privacy)?,
            MarginalEncoding::default(),
            &SeedStream::new(seed),
            DEFAULT_TABLE_CAP,
        )?;
        *out_handle = Box::into_raw(Box::new(LdpMarginals { table }));
        Ok(())
    })
}

/// Answers the disjunction query `y` (`p` bytes, each 0 or 1, at most `k`
/// ones). The answer is clamped to `[0, 1]`.
///
/// # Safety
/// `handle` must come from [`ldp_marginals_release`], `query` must point to
/// `p` bytes and `out_answer` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn ldp_marginals_answer(
    handle: *const LdpMarginals,
    query: *const u8,
    p: usize,
    out_answer: *mut f64,
) -> LdpStatus {
    guard(|| {
        let handle = handle.as_ref().ok_or_else(|| null("handle"))?;
        let query = slice(query, p, "query")?;
        let out_answer = out(out_answer, "out_answer")?;
        *out_answer = handle.table.answer(query)?.clamped;
        Ok(())
    })
}

/// # Safety
/// `handle` must come from [`ldp_marginals_release`] and not be used again.
/// NULL is accepted.
#[no_mangle]
pub unsafe extern "C" fn ldp_marginals_free(handle: *mut LdpMarginals) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Releases the degree-`t` tensor Chebyshev table of `n` points in
/// `[-1, 1]^p`.
///
/// # Safety
/// `points` must point to `n * p` doubles and `out_handle` to a writable
/// handle slot. Free the handle with [`ldp_smooth_free`].
#[no_mangle]
pub unsafe extern "C" fn ldp_smooth_release(
    points: *const f64,
    n: usize,
    p: usize,
    t: usize,
    privacy: LdpPrivacy,
    seed: u64,
    out_handle: *mut *mut LdpSmooth,
) -> LdpStatus {
    guard(|| {
        let rows = slice(points, checked_len(n, p)?, "points")?;
        let out_handle = out(out_handle, "out_handle")?;
        let data = BoxDataset::new(Records::new(p, rows.to_vec())?)?;
        let release = smooth_release(
            &data,
            t,
            &privacy_of(privacy)?,
            &SeedStream::new(seed),
            DEFAULT_TABLE_CAP,
        )?;
        *out_handle = Box::into_raw(Box::new(LdpSmooth { release }));
        Ok(())
    })
}

/// Mean of the Gaussian kernel `exp(-|x - center|^2 / (2 h^2))` over the
/// released data.
///
/// # Safety
/// `handle` must come from [`ldp_smooth_release`], `center` must point to `p`
/// doubles and `out_answer` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn ldp_smooth_answer_gaussian(
    handle: *const LdpSmooth,
    center: *const f64,
    p: usize,
    bandwidth: f64,
    out_answer: *mut f64,
) -> LdpStatus {
    guard(|| {
        let handle = handle.as_ref().ok_or_else(|| null("handle"))?;
        let center = slice(center, p, "center")?;
        let out_answer = out(out_answer, "out_answer")?;
        if p != handle.release.p {
            return Err(Fail(
                LdpStatus::Parameter,
                format!(
                    "center has {p} coordinates, release has {}",
                    handle.release.p
                ),
            ));
        }
        if bandwidth.is_nan() || bandwidth <= 0.0 {
            return Err(Fail(
                LdpStatus::Parameter,
                "bandwidth must be positive".into(),
            ));
        }
        *out_answer = handle
            .release
            .answer_fn(gaussian_kernel(center, bandwidth))?;
        Ok(())
    })
}

/// # Safety
/// `handle` must come from [`ldp_smooth_release`] and not be used again.
/// NULL is accepted.
#[no_mangle]
pub unsafe extern "C" fn ldp_smooth_free(handle: *mut LdpSmooth) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Runs the experiment described by a TOML document and writes the report
/// files into `out_dir`. Returns `LDP_STATUS_ESTIMATION` when some trials
/// failed; their rows are still written.
///
/// # Safety
/// Both arguments must be NUL-terminated UTF-8 strings.
#[no_mangle]
pub unsafe extern "C" fn ldp_run_experiment(
    config_toml: *const c_char,
    out_dir: *const c_char,
) -> LdpStatus {
    guard(|| {
        let text = string(config_toml, "config_toml")?;
        let dir = string(out_dir, "out_dir")?;
        let cfg = ExperimentConfig::from_toml_str(text)?;
        cfg.validate()?;
        let outcome = run_experiment(&cfg)?;
        write_outputs(&cfg, &outcome, Path::new(dir))?;
        if outcome.failures > 0 {
            return Err(Fail(
                LdpStatus::Estimation,
                format!(
                    "{} of {} trials failed",
                    outcome.failures,
                    outcome.rows.len()
                ),
            ));
        }
        Ok(())
    })
}
