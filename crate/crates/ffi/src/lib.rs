//! C interface to the adapense estimators.
//!
//! Objects are opaque handles created and released by this library. Every
//! fallible function returns an [`ApStatus`]; on failure the message of the
//! most recent error on the calling thread is available from
//! [`ap_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use adapense::cv::{fit_with_cv, CvConfig, CvFit, CvScore};
use adapense::pense::PathConfig;
use adapense::rho::{consistency_cutoff, RhoConfig};
use adapense::scale::{m_scale, tau_scale, MScaleSolverConfig, TauScaleConfig};
use adapense::{Dataset, PenseError};

/// Status codes; non-zero values mirror the command-line exit codes where
/// they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApStatus {
    Ok = 0,
    /// Null pointer or buffer too small.
    InvalidArgument = 1,
    /// Invalid configuration value.
    ConfigError = 2,
    /// Invalid or degenerate data.
    DataError = 3,
    ConvergenceError = 4,
    /// A Rust panic was caught at the boundary.
    InternalError = 5,
}

/// Opaque dataset handle.
pub struct ApDataset {
    inner: Dataset,
}

/// Opaque fit handle.
pub struct ApFit {
    inner: CvFit,
    scale: f64,
}

/// Fitting options. Obtain defaults from [`ap_fit_config_default`].
///
/// `alphas`/`zetas` may be null, in which case the defaults
/// {0.5, 0.75, 1} and {1, 2} are used. `threads = 0` uses all cores.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ApFitConfig {
    pub delta: f64,
    pub c_tau: f64,
    pub folds: usize,
    pub replications: usize,
    pub seed: u64,
    pub n_lambda: usize,
    pub lambda_ratio: f64,
    pub alphas: *const f64,
    pub n_alphas: usize,
    pub zetas: *const f64,
    pub n_zetas: usize,
    /// Non-zero for the two-stage adaptive estimator.
    pub adaptive: i32,
    pub threads: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &PenseError) -> ApStatus {
    match err {
        PenseError::InvalidParameter(_) => ApStatus::ConfigError,
        PenseError::Convergence { .. } => ApStatus::ConvergenceError,
        _ => ApStatus::DataError,
    }
}

enum Failure {
    Null(&'static str),
    Small(&'static str),
    Model(PenseError),
}

impl From<PenseError> for Failure {
    fn from(e: PenseError) -> Self {
        Failure::Model(e)
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ApStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ApStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            ApStatus::InvalidArgument
        }
        Ok(Err(Failure::Small(what))) => {
            set_error(format!("buffer too small: {what}"));
            ApStatus::InvalidArgument
        }
        Ok(Err(Failure::Model(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal error (panic)".into());
            ApStatus::InternalError
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

/// Message of the last error raised on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ap_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn ap_fit_config_default() -> ApFitConfig {
    let d = CvConfig::default();
    ApFitConfig {
        delta: d.path.sloss.delta,
        c_tau: match d.score {
            CvScore::Tau { c_tau } => c_tau,
            CvScore::RootMeanSquared => 3.0,
        },
        folds: d.folds,
        replications: d.replications,
        seed: d.seed,
        n_lambda: d.n_lambda,
        lambda_ratio: d.lambda_ratio,
        alphas: ptr::null(),
        n_alphas: 0,
        zetas: ptr::null(),
        n_zetas: 0,
        adaptive: 1,
        threads: 0,
    }
}

/// Copies `n` observations of `p` predictors (`x` row-major, length `n * p`)
/// and the response `y` into a new dataset.
///
/// # Safety
/// `x` must point to `n * p` doubles, `y` to `n` doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ap_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    out_handle: *mut *mut ApDataset,
) -> ApStatus {
    guard(|| {
        let slot = out(out_handle, "out")?;
        *slot = ptr::null_mut();
        let len = n.checked_mul(p).ok_or(Failure::Model(PenseError::InvalidData("n * p overflows".into())))?;
        let xs = slice(x, len, "x")?;
        let ys = slice(y, n, "y")?;
        if p == 0 {
            return Err(PenseError::InvalidData("no predictors".into()).into());
        }
        let inner = Dataset::from_rows(ys.to_vec(), xs, p)?;
        *slot = Box::into_raw(Box::new(ApDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `data` must be null or a handle from [`ap_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ap_dataset_free(data: *mut ApDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

unsafe fn cv_config(cfg: &ApFitConfig) -> Result<CvConfig, Failure> {
    let d = CvConfig::default();
    let alphas = if cfg.alphas.is_null() {
        d.alphas.clone()
    } else {
        slice(cfg.alphas, cfg.n_alphas, "alphas")?.to_vec()
    };
    let zetas = if cfg.zetas.is_null() {
        d.zetas.clone()
    } else {
        slice(cfg.zetas, cfg.n_zetas, "zetas")?.to_vec()
    };
    let c = CvConfig {
        folds: cfg.folds,
        replications: cfg.replications,
        seed: cfg.seed,
        score: CvScore::Tau { c_tau: cfg.c_tau },
        alphas,
        zetas,
        n_lambda: cfg.n_lambda,
        lambda_ratio: cfg.lambda_ratio,
        ridge_lambda_ratio: cfg.lambda_ratio,
        adaptive: cfg.adaptive != 0,
        threads: (cfg.threads > 0).then_some(cfg.threads),
        path: PathConfig::with_delta(cfg.delta)?,
        ..d
    };
    c.validate()?;
    Ok(c)
}

/// Fits the estimator with cross-validated hyper-parameters.
///
/// # Safety
/// `data` must be a live dataset handle, `config` null (defaults) or a valid
/// configuration, and `out_fit` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ap_fit(
    data: *const ApDataset,
    config: *const ApFitConfig,
    out_fit: *mut *mut ApFit,
) -> ApStatus {
    guard(|| {
        let slot = out(out_fit, "out")?;
        *slot = ptr::null_mut();
        let data = handle(data, "data")?;
        let cfg = match config.as_ref() {
            Some(c) => cv_config(c)?,
            None => CvConfig::default(),
        };
        let inner = fit_with_cv(&data.inner, &cfg)?;
        let scale = inner.fit.scale / consistency_cutoff(cfg.path.sloss.delta)?;
        *slot = Box::into_raw(Box::new(ApFit { inner, scale }));
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a handle from [`ap_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ap_fit_free(fit: *mut ApFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Number of slope coefficients, or 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live fit handle.
#[no_mangle]
pub unsafe extern "C" fn ap_fit_num_coefficients(fit: *const ApFit) -> usize {
    fit.as_ref().map_or(0, |f| f.inner.fit.beta.len())
}

/// Writes the intercept and the `len` slope coefficients (original scale).
///
/// # Safety
/// `intercept` must be writable and `beta` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ap_fit_coefficients(
    fit: *const ApFit,
    intercept: *mut f64,
    beta: *mut f64,
    len: usize,
) -> ApStatus {
    guard(|| {
        let f = &handle(fit, "fit")?.inner.fit;
        if len < f.beta.len() {
            return Err(Failure::Small("beta"));
        }
        if beta.is_null() && !f.beta.is_empty() {
            return Err(Failure::Null("beta"));
        }
        *out(intercept, "intercept")? = f.intercept;
        if !f.beta.is_empty() {
            std::slice::from_raw_parts_mut(beta, f.beta.len()).copy_from_slice(&f.beta);
        }
        Ok(())
    })
}

/// Residual M-scale of the fit, consistent under Normal errors.
///
/// # Safety
/// `fit` must be a live fit handle and `scale` writable.
#[no_mangle]
pub unsafe extern "C" fn ap_fit_scale(fit: *const ApFit, scale: *mut f64) -> ApStatus {
    guard(|| {
        *out(scale, "scale")? = handle(fit, "fit")?.scale;
        Ok(())
    })
}

/// Selected penalty level, mixing parameter and exponent (NaN for the
/// non-adaptive estimator).
///
/// # Safety
/// `fit` must be a live fit handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ap_fit_selected(
    fit: *const ApFit,
    lambda: *mut f64,
    alpha: *mut f64,
    zeta: *mut f64,
) -> ApStatus {
    guard(|| {
        let s = &handle(fit, "fit")?.inner.selected;
        *out(lambda, "lambda")? = s.lambda;
        *out(alpha, "alpha")? = s.alpha;
        *out(zeta, "zeta")? = s.zeta.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Predictions `intercept + x beta` for `n` rows of row-major `x`.
///
/// # Safety
/// `x` must hold `n * p` doubles (p = number of coefficients) and
/// `predictions` `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ap_fit_predict(
    fit: *const ApFit,
    x: *const f64,
    n: usize,
    predictions: *mut f64,
) -> ApStatus {
    guard(|| {
        let f = &handle(fit, "fit")?.inner.fit;
        let p = f.beta.len();
        let len = n.checked_mul(p).ok_or(Failure::Small("x"))?;
        let xs = slice(x, len, "x")?;
        if n > 0 && predictions.is_null() {
            return Err(Failure::Null("predictions"));
        }
        for i in 0..n {
            let row = &xs[i * p..(i + 1) * p];
            *predictions.add(i) = f.intercept + row.iter().zip(&f.beta).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(())
    })
}

/// M-scale of `values` with the bisquare function, consistent for the
/// standard deviation under the Normal model, at breakdown point `delta`.
///
/// # Safety
/// `values` must hold `n` doubles and `out_scale` be writable.
#[no_mangle]
pub unsafe extern "C" fn ap_m_scale(values: *const f64, n: usize, delta: f64, out_scale: *mut f64) -> ApStatus {
    guard(|| {
        let v = slice(values, n, "values")?;
        let cfg = MScaleSolverConfig::new(RhoConfig::consistent(delta)?);
        *out(out_scale, "out")? = m_scale(v, &cfg)?;
        Ok(())
    })
}

/// Tau-scale of `values` (uncentered) with tuning constant `c_tau`.
///
/// # Safety
/// `values` must hold `n` doubles and `out_scale` be writable.
#[no_mangle]
pub unsafe extern "C" fn ap_tau_scale(values: *const f64, n: usize, c_tau: f64, out_scale: *mut f64) -> ApStatus {
    guard(|| {
        let v = slice(values, n, "values")?;
        *out(out_scale, "out")? = tau_scale(v, &TauScaleConfig { c_tau })?;
        Ok(())
    })
}
