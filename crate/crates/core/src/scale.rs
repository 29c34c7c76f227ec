//! Robust univariate estimators: the M-scale behind the S-loss, the
//! uncentered tau-scale used to score prediction errors, and the M-location
//! used for standardization.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_data, invalid_param, PenseError, Result};
use crate::rho::{Bisquare, RhoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MScaleSolverConfig {
    pub rho: RhoConfig,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl MScaleSolverConfig {
    pub fn new(rho: RhoConfig) -> Self {
        MScaleSolverConfig {
            rho,
            tolerance: 1e-8,
            max_iterations: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rho.validate()?;
        if !(self.tolerance > 0.0) {
            return Err(invalid_param("M-scale tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(invalid_param("M-scale needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauScaleConfig {
    pub c_tau: f64,
}

impl Default for TauScaleConfig {
    fn default() -> Self {
        TauScaleConfig { c_tau: 3.0 }
    }
}

/// Lower median: the order statistic of rank `ceil(n/2)`.
pub fn lower_median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    let k = (values.len() + 1) / 2 - 1;
    let (_, m, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    *m
}

/// M-scale of `residuals`: the `s` solving `mean(rho(r_i / s)) = delta`.
///
/// NaN entries are ignored; infinite entries count as fully outlying.
pub fn m_scale(residuals: &[f64], cfg: &MScaleSolverConfig) -> Result<f64> {
    cfg.validate()?;
    m_scale_with(
        residuals,
        cfg.rho.bisquare(),
        cfg.rho.delta,
        cfg.tolerance,
        cfg.max_iterations,
        None,
    )
}

/// Solver core. `start` is an optional initial guess (e.g. the scale at the
/// previous iterate of an outer algorithm).
pub(crate) fn m_scale_with(
    residuals: &[f64],
    rho: Bisquare,
    delta: f64,
    tol: f64,
    max_iter: usize,
    start: Option<f64>,
) -> Result<f64> {
    let mut n = 0usize;
    let mut nonzero = 0usize;
    let mut min_pos = f64::INFINITY;
    let mut max_finite = 0.0f64;
    for &r in residuals {
        if r.is_nan() {
            continue;
        }
        n += 1;
        let a = r.abs();
        if a > 0.0 {
            nonzero += 1;
            min_pos = min_pos.min(a);
            if a.is_finite() {
                max_finite = max_finite.max(a);
            }
        }
    }
    if n == 0 {
        return Err(invalid_data("M-scale of an empty or all-NaN vector"));
    }
    let nf = n as f64;
    // Exact fit of at least n(1 - delta) observations.
    if (nonzero as f64) <= nf * delta {
        return Ok(0.0);
    }
    if max_finite == 0.0 {
        // Every non-zero residual is infinite.
        return Ok(f64::INFINITY);
    }

    let c = rho.cutoff();
    let eval = |s: f64| -> (f64, f64) {
        let mut f = 0.0;
        let mut d = 0.0;
        for &r in residuals {
            if r.is_nan() {
                continue;
            }
            let t = r / s;
            f += rho.rho(t);
            d += rho.varphi(t);
        }
        (f / nf - delta, -d / (nf * s))
    };

    // Below min|r|/c every non-zero residual has rho = 1, so f > 0 there.
    let mut lo = min_pos / c;
    let mut hi = (max_finite / c).max(lo) * (3.0 / delta).sqrt() * 2.0;
    while eval(hi).0 > 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Ok(f64::INFINITY);
        }
    }

    let mut s = match start {
        Some(s0) if s0 > lo && s0 < hi => s0,
        _ => (lo * hi).sqrt(),
    };
    for _ in 0..max_iter {
        let (f, d) = eval(s);
        if f > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let mut next = if d < 0.0 { s - f / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() <= tol * next || (hi - lo) <= tol * lo {
            return Ok(next);
        }
        s = next;
    }
    Err(PenseError::Convergence {
        what: "M-scale",
        iterations: max_iter,
        last: s,
    })
}

/// Uncentered tau-scale of prediction errors,
/// `med * sqrt(mean(min(c_tau, |r_i| / med)^2))` with `med = median |r_i|`.
pub fn tau_scale(errors: &[f64], cfg: &TauScaleConfig) -> Result<f64> {
    if errors.is_empty() {
        return Err(invalid_data("tau-scale of an empty vector"));
    }
    if !(cfg.c_tau > 0.0) {
        return Err(invalid_param("c_tau must be positive"));
    }
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    if abs.iter().any(|a| a.is_nan()) {
        return Err(invalid_data("tau-scale input contains NaN"));
    }
    let med = lower_median(&mut abs);
    if med == 0.0 {
        return Ok(0.0);
    }
    let mean_sq = abs
        .iter()
        .map(|&a| {
            let t = (a / med).min(cfg.c_tau);
            t * t
        })
        .sum::<f64>()
        / abs.len() as f64;
    Ok(med * mean_sq.sqrt())
}

/// Tuning of the bisquare M-location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MLocationConfig {
    pub cutoff: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MLocationConfig {
    fn default() -> Self {
        MLocationConfig {
            cutoff: 4.685,
            tolerance: 1e-10,
            max_iterations: 500,
        }
    }
}

const MAD_CONSISTENCY: f64 = 1.4826;

/// Median absolute deviation about `center`, scaled for Normal consistency.
pub fn mad(values: &[f64], center: f64) -> f64 {
    let mut dev: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    MAD_CONSISTENCY * lower_median(&mut dev)
}

/// Bisquare M-estimate of location, iterated from the median with the
/// MAD as auxiliary scale.
pub fn m_location(values: &[f64], cfg: &MLocationConfig) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid_data("M-location of an empty vector"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid_data("M-location input contains non-finite values"));
    }
    let psi = Bisquare::new(cfg.cutoff)?;
    let mut buf = values.to_vec();
    let mut mu = lower_median(&mut buf);
    let scale = mad(values, mu);
    if scale == 0.0 {
        // More than half the values coincide with the median; every other
        // value is infinitely outlying relative to a zero scale.
        let band = 1e-12 * (1.0 + mu.abs());
        let (sum, cnt) = values
            .iter()
            .filter(|v| (*v - mu).abs() <= band)
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        return Ok(sum / cnt as f64);
    }
    for _ in 0..cfg.max_iterations {
        let (mut sw, mut swx) = (0.0, 0.0);
        for &v in values {
            let w = psi.weight((v - mu) / scale);
            sw += w;
            swx += w * v;
        }
        let next = swx / sw;
        if (next - mu).abs() <= cfg.tolerance * scale {
            return Ok(next);
        }
        mu = next;
    }
    Err(PenseError::Convergence {
        what: "M-location",
        iterations: cfg.max_iterations,
        last: mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(c: f64, delta: f64) -> MScaleSolverConfig {
        MScaleSolverConfig::new(RhoConfig::new(c, delta).unwrap())
    }

    #[test]
    fn m_scale_exact_fit_is_zero() {
        assert_eq!(m_scale(&[0.0; 6], &cfg(1.0, 0.5)).unwrap(), 0.0);
        // 3 of 4 exact with delta 0.25: 1 nonzero <= n*delta
        assert_eq!(m_scale(&[0.0, 0.0, 0.0, 4.0], &cfg(1.0, 0.25)).unwrap(), 0.0);
        // 2 of 4 exact with delta 0.25: positive
        assert!(m_scale(&[0.0, 0.0, 1.0, 4.0], &cfg(1.0, 0.25)).unwrap() > 0.0);
    }

    #[test]
    fn m_scale_unit_residuals() {
        // bisection oracle: rho(1/s) = 0.5
        let (mut lo, mut hi) = (1.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let u = 1.0 / (mid * mid);
            let r = 1.0 - (1.0 - u).powi(3);
            if r > 0.5 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let s = m_scale(&[1.0; 4], &cfg(1.0, 0.5)).unwrap();
        assert_abs_diff_eq!(s, lo, epsilon = 1e-7);
        assert_abs_diff_eq!(s, 2.2017, epsilon = 1e-4);
    }

    #[test]
    fn m_scale_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r: Vec<f64> = (0..57).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let rk: Vec<f64> = r.iter().map(|v| 3.7 * v).collect();
        let c = cfg(1.0, 0.25);
        let s = m_scale(&r, &c).unwrap();
        assert_abs_diff_eq!(m_scale(&rk, &c).unwrap(), 3.7 * s, epsilon = 1e-7 * s);
    }

    #[test]
    fn m_scale_rejects_nan_only() {
        assert!(matches!(
            m_scale(&[f64::NAN, f64::NAN], &cfg(1.0, 0.5)),
            Err(PenseError::InvalidData(_))
        ));
    }

    #[test]
    fn m_scale_reports_non_convergence() {
        let c = MScaleSolverConfig {
            max_iterations: 1,
            tolerance: 1e-15,
            ..cfg(1.0, 0.5)
        };
        let r: Vec<f64> = (1..40).map(|v| v as f64 * 0.37).collect();
        assert!(matches!(m_scale(&r, &c), Err(PenseError::Convergence { .. })));
    }

    #[test]
    fn tau_scale_examples() {
        let t = TauScaleConfig { c_tau: 3.0 };
        assert_abs_diff_eq!(tau_scale(&[2.5, -2.5, 2.5], &t).unwrap(), 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            tau_scale(&[1.0, 1.0, 1.0, 1e6], &t).unwrap(),
            3f64.sqrt(),
            epsilon = 1e-12
        );
        let r = [0.3, -1.2, 2.2, 0.7, -0.1];
        let rk: Vec<f64> = r.iter().map(|v| v * 4.0).collect();
        assert_abs_diff_eq!(
            tau_scale(&rk, &t).unwrap(),
            4.0 * tau_scale(&r, &t).unwrap(),
            epsilon = 1e-12
        );
        assert_eq!(tau_scale(&[0.0, 0.0], &t).unwrap(), 0.0);
        assert!(tau_scale(&[], &t).is_err());
    }

    #[test]
    fn m_location_examples() {
        let c = MLocationConfig::default();
        assert_eq!(m_location(&[5.0, 5.0, 5.0], &c).unwrap(), 5.0);
        assert_abs_diff_eq!(m_location(&[-1.0, 0.0, 1.0], &c).unwrap(), 0.0, epsilon = 1e-12);
        let v = m_location(&[0.0, 0.0, 0.0, 0.0, 100.0], &c).unwrap();
        assert!((0.0..=0.01).contains(&v));
    }

    #[test]
    fn m_location_translation_equivariant() {
        let c = MLocationConfig::default();
        let v = [0.4, 1.9, -0.3, 2.2, 0.8, 15.0, 1.1];
        let shifted: Vec<f64> = v.iter().map(|x| x + 10.0).collect();
        assert_abs_diff_eq!(
            m_location(&shifted, &c).unwrap(),
            m_location(&v, &c).unwrap() + 10.0,
            epsilon = 1e-8
        );
    }
}
