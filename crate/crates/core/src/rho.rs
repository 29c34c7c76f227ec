//! Tukey's bisquare rho function and its derivatives.
//!
//! The bounded loss is `rho(t; c) = 1 - (1 - (t/c)^2)^3` for `|t| <= c` and 1
//! beyond. It belongs to a scale family, `rho(t; c) = rho(t/c; 1)`, so the
//! S-loss uses `c = 1` throughout and the Normal-consistency cutoff is only
//! applied when a residual scale is reported.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Result};

/// Cutoff `c` and breakdown parameter `delta` of the M-scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoConfig {
    pub cutoff: f64,
    pub delta: f64,
}

impl RhoConfig {
    pub fn new(cutoff: f64, delta: f64) -> Result<Self> {
        let cfg = RhoConfig { cutoff, delta };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Unit cutoff used by the S-loss.
    pub fn s_loss(delta: f64) -> Result<Self> {
        RhoConfig::new(1.0, delta)
    }

    /// Cutoff giving a consistent scale under Normal errors for this `delta`.
    pub fn consistent(delta: f64) -> Result<Self> {
        RhoConfig::new(consistency_cutoff(delta)?, delta)
    }

    pub fn validate(&self) -> Result<()> {
        check_cutoff(self.cutoff)?;
        check_delta(self.delta)
    }

    #[inline]
    pub fn bisquare(&self) -> Bisquare {
        Bisquare { c: self.cutoff }
    }
}

fn check_cutoff(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(invalid_param(format!("rho cutoff must be positive, got {c}")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 0.5 {
        Ok(())
    } else {
        Err(invalid_param(format!("delta must lie in (0, 0.5], got {delta}")))
    }
}

/// Bisquare with a validated cutoff. Methods are infallible and inlined for
/// use in the inner loops of the scale and M-M solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisquare {
    c: f64,
}

impl Bisquare {
    pub fn new(c: f64) -> Result<Self> {
        check_cutoff(c)?;
        Ok(Bisquare { c })
    }

    #[inline]
    pub fn cutoff(&self) -> f64 {
        self.c
    }

    #[inline]
    pub fn rho(&self, t: f64) -> f64 {
        let u = t / self.c;
        let u2 = u * u;
        if u2 >= 1.0 {
            1.0
        } else {
            let v = 1.0 - u2;
            1.0 - v * v * v
        }
    }

    #[inline]
    pub fn psi(&self, t: f64) -> f64 {
        let u = t / self.c;
        let u2 = u * u;
        if u2 >= 1.0 {
            0.0
        } else {
            let v = 1.0 - u2;
            6.0 * t / (self.c * self.c) * v * v
        }
    }

    #[inline]
    pub fn psi_prime(&self, t: f64) -> f64 {
        let u = t / self.c;
        let u2 = u * u;
        if u2 >= 1.0 {
            0.0
        } else {
            6.0 / (self.c * self.c) * (1.0 - u2) * (1.0 - 5.0 * u2)
        }
    }

    /// `psi(t) / t`, continuously extended by `psi'(0)` at the origin.
    #[inline]
    pub fn weight(&self, t: f64) -> f64 {
        let u = t / self.c;
        let u2 = u * u;
        if u2 >= 1.0 {
            0.0
        } else {
            let v = 1.0 - u2;
            6.0 / (self.c * self.c) * v * v
        }
    }

    #[inline]
    pub fn varphi(&self, t: f64) -> f64 {
        self.psi(t) * t
    }
}

pub fn rho(t: f64, c: f64) -> Result<f64> {
    Ok(Bisquare::new(c)?.rho(t))
}

pub fn psi(t: f64, c: f64) -> Result<f64> {
    Ok(Bisquare::new(c)?.psi(t))
}

pub fn psi_prime(t: f64, c: f64) -> Result<f64> {
    Ok(Bisquare::new(c)?.psi_prime(t))
}

pub fn varphi(t: f64, c: f64) -> Result<f64> {
    Ok(Bisquare::new(c)?.varphi(t))
}

const QUADRATURE_NODES: usize = 96;

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| {
        let m = QUADRATURE_NODES;
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..(m + 1) / 2 {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[m - 1 - i] = z;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        (nodes, weights)
    })
}

/// `E[rho(Z; c)]` for standard Normal `Z`.
pub(crate) fn expected_rho_normal(c: f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let b = Bisquare { c };
    let half = 0.5 * c;
    let inner: f64 = nodes
        .iter()
        .zip(weights)
        .map(|(&x, &w)| {
            let z = half * (x + 1.0);
            w * b.rho(z) * (-0.5 * z * z).exp()
        })
        .sum::<f64>()
        * half;
    let density = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    2.0 * density * inner + statrs::function::erf::erfc(c / std::f64::consts::SQRT_2)
}

/// Cutoff `c` with `E[rho(Z; c)] = delta` under the standard Normal, which
/// makes the M-scale of Normal data consistent for its standard deviation.
pub fn consistency_cutoff(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().expect("cutoff cache").get(&delta.to_bits()) {
        return Ok(c);
    }
    // E[rho(Z; c)] decreases from 1 to 0 as c grows.
    let (mut lo, mut hi) = (1e-3, 1.0);
    while expected_rho_normal(hi) > delta {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if expected_rho_normal(mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    cache.lock().expect("cutoff cache").insert(delta.to_bits(), c);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rho_examples() {
        assert_eq!(rho(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(rho(1.5, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(rho(0.5, 1.0).unwrap(), 0.578125, epsilon = 1e-15);
        assert!(rho(0.3, 0.0).is_err());
        assert!(rho(0.3, -1.0).is_err());
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(psi(1.0, 1.0).unwrap(), 0.0);
        // central difference of rho at 0.5 with step 1e-6
        let h = 1e-6;
        let fd = (rho(0.5 + h, 1.0).unwrap() - rho(0.5 - h, 1.0).unwrap()) / (2.0 * h);
        assert_abs_diff_eq!(fd, 1.6875, epsilon = 1e-8);
        assert_abs_diff_eq!(psi(0.5, 1.0).unwrap(), 1.6875, epsilon = 1e-12);
    }

    #[test]
    fn psi_prime_examples() {
        assert_eq!(psi_prime(1.2, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(psi_prime(0.0, 1.0).unwrap(), 6.0, epsilon = 1e-12);
        let h = 1e-6;
        let fd = (psi(0.5 + h, 1.0).unwrap() - psi(0.5 - h, 1.0).unwrap()) / (2.0 * h);
        assert_abs_diff_eq!(psi_prime(0.5, 1.0).unwrap(), fd, epsilon = 1e-8);
    }

    #[test]
    fn varphi_examples() {
        assert_eq!(varphi(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(varphi(2.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(varphi(0.5, 1.0).unwrap(), 0.84375, epsilon = 1e-12);
    }

    #[test]
    fn weight_limit_at_zero() {
        let b = Bisquare::new(1.0).unwrap();
        assert_eq!(b.weight(0.0), b.psi_prime(0.0));
        assert_abs_diff_eq!(b.weight(0.5), 3.375, epsilon = 1e-12);
        assert_eq!(b.weight(2.0), 0.0);
    }

    #[test]
    fn consistency_cutoff_ordering_and_range() {
        let c10 = consistency_cutoff(0.1).unwrap();
        let c25 = consistency_cutoff(0.25).unwrap();
        let c50 = consistency_cutoff(0.5).unwrap();
        assert!(c10 > c25 && c25 > c50);
        assert_abs_diff_eq!(c50, 1.5476, epsilon = 1e-4);
        assert!(consistency_cutoff(0.0).is_err());
        assert!(consistency_cutoff(0.51).is_err());
    }

    #[test]
    fn quadrature_weights_integrate_constants() {
        let (_, w) = gauss_legendre();
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
    }
}
