//! Two-stage estimator: a ridge-type penalized S-estimate supplies the
//! penalty loadings of the adaptive elastic-net penalized S-estimate.

use serde::{Deserialize, Serialize};

use super::{FitResult, PenaltyFamily};
use crate::cv::{self, CvConfig, HyperPair};
use crate::data::Dataset;
use crate::error::{invalid_param, PenseError, Result};

/// Coefficients of the preliminary estimate below this are treated as zero.
const ZERO_PRELIMINARY: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveSpec {
    pub alpha: f64,
    pub zeta: f64,
    pub loading_cap: f64,
}

impl AdaptiveSpec {
    pub fn new(alpha: f64, zeta: f64) -> Result<Self> {
        let spec = AdaptiveSpec {
            alpha,
            zeta,
            loading_cap: 1e8,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return Err(invalid_param(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.zeta >= 1.0 && self.zeta.is_finite()) {
            return Err(invalid_param(format!("zeta must be at least 1, got {}", self.zeta)));
        }
        if !(self.loading_cap > 0.0) {
            return Err(invalid_param("loading cap must be positive"));
        }
        Ok(())
    }
}

/// Penalty loadings `min(|b_j|^-zeta, cap)`; coefficients below 1e-8 in
/// absolute value get the cap.
pub fn adaptive_loadings(preliminary: &[f64], zeta: f64, cap: f64) -> Result<Vec<f64>> {
    if !(zeta >= 1.0 && zeta.is_finite()) {
        return Err(invalid_param(format!("zeta must be at least 1, got {zeta}")));
    }
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(invalid_param("loading cap must be positive and finite"));
    }
    let w: Vec<f64> = preliminary
        .iter()
        .map(|b| {
            let a = b.abs();
            if a < ZERO_PRELIMINARY || !a.is_finite() {
                cap
            } else {
                a.powf(-zeta).min(cap)
            }
        })
        .collect();
    if w.iter().all(|v| *v >= cap) {
        return Err(PenseError::InvalidPreliminary(
            "every preliminary coefficient is zero; all loadings at cap".into(),
        ));
    }
    Ok(w)
}

/// Ridge-type penalized S-estimate with the penalty level chosen by CV
/// (minimum mean score) over `lambdas`.
pub fn pense_ridge(data: &Dataset, lambdas: &[f64], cfg: &CvConfig) -> Result<FitResult> {
    let pairs = vec![HyperPair {
        alpha: 0.0,
        zeta: None,
        loadings: vec![1.0; data.p()],
        lambdas: lambdas.to_vec(),
    }];
    let (fit, _) = cv::min_stage(data, &pairs, cfg)?;
    Ok(fit)
}

/// Adaptive penalized S-estimate with loadings from `preliminary` and the
/// penalty level chosen by CV with the one-SE rule.
pub fn adaptive_pense(
    data: &Dataset,
    spec: &AdaptiveSpec,
    preliminary: &FitResult,
    lambdas: &[f64],
    cfg: &CvConfig,
) -> Result<FitResult> {
    spec.validate()?;
    let loadings = adaptive_loadings(&preliminary.beta, spec.zeta, spec.loading_cap)?;
    PenaltyFamily::new(spec.alpha, loadings.clone())?;
    let pairs = vec![HyperPair {
        alpha: spec.alpha,
        zeta: Some(spec.zeta),
        loadings,
        lambdas: lambdas.to_vec(),
    }];
    let (fit, _, _) = cv::select_stage(data, &pairs, cfg)?;
    Ok(fit)
}

/// Norm of the coefficient vector of `estimator` on `data` and on a copy in
/// which `m` evenly spaced observations are replaced by an identical
/// bad-leverage point of size `magnitude`.
pub fn breakdown_probe<F>(data: &Dataset, m: usize, magnitude: f64, estimator: F) -> Result<(f64, f64)>
where
    F: Fn(&Dataset) -> Result<FitResult>,
{
    let n = data.n();
    if m >= n {
        return Err(invalid_param(format!("cannot replace {m} of {n} observations")));
    }
    if !(magnitude > 0.0 && magnitude.is_finite()) {
        return Err(invalid_param("magnitude must be positive and finite"));
    }
    let clean = estimator(data)?.beta_norm();
    if m == 0 {
        return Ok((clean, clean));
    }
    let p = data.p();
    let (mut x, mut y) = data.clone().into_parts();
    let lev = magnitude / (p as f64).sqrt();
    for k in 0..m {
        let i = k * n / m;
        for j in 0..p {
            x[(i, j)] = lev;
        }
        y[i] = magnitude * magnitude;
    }
    let bad = Dataset::new(x, y)?;
    Ok((clean, estimator(&bad)?.beta_norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn loadings_formula() {
        let w = adaptive_loadings(&[10.0, 10.0, 0.001, 0.001], 1.0, 1e8).unwrap();
        assert_abs_diff_eq!(w[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(w[2], 1000.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w[3], 1000.0, epsilon = 1e-9);
        let capped = adaptive_loadings(&[10.0, 1e-3], 2.0, 100.0).unwrap();
        assert_eq!(capped[1], 100.0);
        let tiny = adaptive_loadings(&[1.0, 1e-9], 1.0, 1e8).unwrap();
        assert_eq!(tiny[1], 1e8);
    }

    #[test]
    fn degenerate_preliminary_rejected() {
        assert!(matches!(
            adaptive_loadings(&[0.0, 0.0, 1e-10], 1.0, 1e8),
            Err(PenseError::InvalidPreliminary(_))
        ));
        assert!(adaptive_loadings(&[1.0], 0.0, 1e8).is_err());
        assert!(AdaptiveSpec::new(0.5, 0.5).is_err());
    }
}
