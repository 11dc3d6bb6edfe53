//! C ABI for the riskcap capital engine.
//!
//! Every fallible call returns a [`RiskcapStatus`]; on failure the message is
//! available from [`riskcap_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use riskcap::bayes::{credible_interval, update_poisson_gamma, PosteriorState};
use riskcap::capital::{
    conditional_capital, predictive_capital, CapitalReport, CapitalSettings, CellModel, LossData,
    SeverityModel, Warning,
};
use riskcap::distributions::GammaParams;
use riskcap::mc_engine::SimOptions;
use riskcap::{Error, ErrorClass};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskcapStatus {
    Ok = 0,
    /// Bad arguments or data.
    Validation = 1,
    /// Numerical failure (zero-mass truncation, sample cap, ...).
    Computation = 2,
    Io = 3,
    NullPointer = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskcapMode {
    Conditional = 0,
    Predictive = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskcapSeverity {
    Lognormal = 0,
    Pareto = 1,
}

pub const RISKCAP_WARN_INFINITE_MEAN: u32 = 1;
pub const RISKCAP_WARN_UNRELIABLE_CI: u32 = 2;
pub const RISKCAP_WARN_UNCONVERGED: u32 = 4;

/// Quantile estimate with its order-statistic confidence interval.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RiskcapQuantile {
    pub q: f64,
    pub value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub ci_level: f64,
    pub k: u64,
    pub reliable_ci: bool,
    pub converged: bool,
    /// Bitwise OR of `RISKCAP_WARN_*`.
    pub warnings: u32,
}

/// Annual counts plus the severities of all events.
pub struct RiskcapLossData(LossData);

/// One risk cell with a non-informative prior.
pub struct RiskcapCellModel(CellModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(RiskcapStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let s = match e.class() {
            ErrorClass::Validation => RiskcapStatus::Validation,
            ErrorClass::Computation => RiskcapStatus::Computation,
            ErrorClass::Io => RiskcapStatus::Io,
        };
        Failure(s, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RiskcapStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RiskcapStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RiskcapStatus::Ok,
        Ok(Err(Failure(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            RiskcapStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn riskcap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next riskcap call on this thread.
#[no_mangle]
pub extern "C" fn riskcap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds loss data from `n_years` annual counts and `n_events` severities,
/// where `n_events` must equal the sum of the counts.
///
/// # Safety
/// `counts` and `severities` must point to at least `n_years` and `n_events`
/// readable values (they may be NULL when the length is 0); `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn riskcap_loss_data_new(
    counts: *const u64,
    n_years: usize,
    severities: *const f64,
    n_events: usize,
    out: *mut *mut RiskcapLossData,
) -> RiskcapStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let c = slice(counts, n_years, "counts")?;
        let s = slice(severities, n_events, "severities")?;
        let d = LossData::new(c.to_vec(), s.to_vec())?;
        *out = Box::into_raw(Box::new(RiskcapLossData(d)));
        Ok(())
    })
}

/// # Safety
/// `data` must be NULL or a handle from [`riskcap_loss_data_new`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn riskcap_loss_data_free(data: *mut RiskcapLossData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Creates a cell with non-informative priors. `threshold` is used for Pareto
/// severities only; `finite_mean` restricts the Pareto tail index to `ξ > 1`.
///
/// # Safety
/// `cell_id` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn riskcap_cell_model_new(
    cell_id: *const c_char,
    severity: RiskcapSeverity,
    threshold: f64,
    finite_mean: bool,
    out: *mut *mut RiskcapCellModel,
) -> RiskcapStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        if cell_id.is_null() {
            return Err(null("cell_id"));
        }
        let id = CStr::from_ptr(cell_id)
            .to_str()
            .map_err(|_| Failure(RiskcapStatus::Validation, "cell_id is not UTF-8".into()))?;
        let sev = match severity {
            RiskcapSeverity::Lognormal => SeverityModel::Lognormal,
            RiskcapSeverity::Pareto => SeverityModel::Pareto { threshold },
        };
        let mut m = CellModel::new(id, sev);
        m.pareto_finite_mean = finite_mean;
        m.validate()?;
        *out = Box::into_raw(Box::new(RiskcapCellModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from [`riskcap_cell_model_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn riskcap_cell_model_free(model: *mut RiskcapCellModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

fn to_quantile(r: &CapitalReport) -> RiskcapQuantile {
    let e = &r.estimate;
    let warnings = r.warnings.iter().fold(0, |acc, w| {
        acc | match w {
            Warning::InfiniteMean { .. } => RISKCAP_WARN_INFINITE_MEAN,
            Warning::UnreliableCi => RISKCAP_WARN_UNRELIABLE_CI,
            Warning::Unconverged { .. } => RISKCAP_WARN_UNCONVERGED,
        }
    });
    RiskcapQuantile {
        q: e.q,
        value: e.value,
        ci_lower: e.ci_lower,
        ci_upper: e.ci_upper,
        ci_level: e.ci_level,
        k: e.k as u64,
        reliable_ci: e.reliable_ci,
        converged: e.converged,
        warnings,
    }
}

/// Capital of one cell: the `q` quantile of `k` simulated annual losses, with a
/// `gamma` confidence interval. `workers = 0` uses all available cores; the
/// result does not depend on it.
///
/// # Safety
/// `model` and `data` must be live handles and `out` a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn riskcap_capital(
    model: *const RiskcapCellModel,
    data: *const RiskcapLossData,
    mode: RiskcapMode,
    q: f64,
    k: u64,
    gamma: f64,
    seed: u64,
    workers: usize,
    out: *mut RiskcapQuantile,
) -> RiskcapStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let model = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let data = &data.as_ref().ok_or_else(|| null("data"))?.0;
        let s = CapitalSettings {
            q,
            k: usize::try_from(k).map_err(|_| Failure(RiskcapStatus::Validation, "k too large".into()))?,
            gamma,
            sim: SimOptions {
                workers: (workers > 0).then_some(workers),
                ..SimOptions::default()
            },
            ..CapitalSettings::new(seed)
        };
        let r = match mode {
            RiskcapMode::Conditional => conditional_capital(model, data, &s)?,
            RiskcapMode::Predictive => predictive_capital(model, data, &s)?,
        };
        *out = to_quantile(&r);
        Ok(())
    })
}

/// Conjugate update of a `Gamma(shape, scale)` prior on a Poisson rate.
///
/// # Safety
/// `counts` must point to `n` readable values (NULL allowed when `n` is 0);
/// the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn riskcap_poisson_gamma_update(
    prior_shape: f64,
    prior_scale: f64,
    counts: *const u64,
    n: usize,
    out_shape: *mut f64,
    out_scale: *mut f64,
) -> RiskcapStatus {
    guard(|| {
        let (os, oc) = (out_ref(out_shape, "out_shape")?, out_ref(out_scale, "out_scale")?);
        let prior = GammaParams::new(prior_shape, prior_scale)?;
        let post = update_poisson_gamma(&prior, slice(counts, n, "counts")?);
        *os = post.shape();
        *oc = post.scale();
        Ok(())
    })
}

/// Equal-tailed credible interval of a `Gamma(shape, scale)` distribution.
///
/// # Safety
/// The output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn riskcap_gamma_interval(
    shape: f64,
    scale: f64,
    level: f64,
    out_lower: *mut f64,
    out_upper: *mut f64,
) -> RiskcapStatus {
    guard(|| {
        let (lo, hi) = (out_ref(out_lower, "out_lower")?, out_ref(out_upper, "out_upper")?);
        let st = PosteriorState::poisson_rate(GammaParams::new(shape, scale)?);
        let iv = credible_interval(&st, level)?[0];
        *lo = iv.lower;
        *hi = iv.upper;
        Ok(())
    })
}
