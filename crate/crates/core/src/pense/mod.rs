//! Penalized S-estimation: the S-loss objective, the M-M descent, initial
//! estimates, the regularization path and the two-stage adaptive estimator.
//!
//! The S-loss is the squared M-scale (unit bisquare cutoff) of the
//! residuals. Each M-M step linearizes the M-scale at the current residuals,
//! which yields a weighted least-squares elastic net with observation
//! weights `psi(t)/t` and an effective penalty level
//! `lambda * sum(w r^2) / (2 sigma^2 sum(w))`. A backtracking line search on
//! the exact objective makes every accepted step non-increasing.

mod adaptive;
mod enpy;
mod path;

pub use adaptive::{adaptive_loadings, adaptive_pense, breakdown_probe, pense_ridge, AdaptiveSpec};
pub use enpy::{en_py_initial_estimates, EnPyConfig};
pub use path::{
    path_lambda_grid, regularization_path, s_lambda_max, PathConfig, PenaltyFamily,
};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::en_solver::{self, EnSolverConfig, PenaltyConfig, WeightedEnProblem};
use crate::error::{invalid_param, PenseError, Result};
use crate::rho::Bisquare;
use crate::scale::m_scale_with;

/// Parameter vector `theta = (mu, beta)` used as a starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub intercept: f64,
    pub beta: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(p: usize) -> Self {
        Coefficients {
            intercept: 0.0,
            beta: vec![0.0; p],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub intercept: f64,
    pub beta: Vec<f64>,
    /// M-scale of the residuals with unit cutoff (the S-loss scale).
    pub scale: f64,
    /// `scale^2 + penalty(beta)`.
    pub objective: f64,
    pub active: Vec<usize>,
    pub iterations: usize,
    pub lambda: f64,
    pub alpha: f64,
    /// Set when the residual scale is zero (exact fit of >= n(1 - delta) points).
    pub degenerate: bool,
    pub converged: bool,
}

impl FitResult {
    pub fn coefficients(&self) -> Coefficients {
        Coefficients {
            intercept: self.intercept,
            beta: self.beta.clone(),
        }
    }

    pub fn beta_norm(&self) -> f64 {
        self.beta.iter().map(|b| b * b).sum::<f64>().sqrt()
    }
}

pub(crate) fn active_set(beta: &[f64]) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// Breakdown parameter and M-scale solver settings of the S-loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SLossConfig {
    pub delta: f64,
    pub scale_tolerance: f64,
    pub scale_max_iterations: usize,
}

impl SLossConfig {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(invalid_param(format!("delta must lie in (0, 0.5], got {delta}")));
        }
        Ok(SLossConfig {
            delta,
            scale_tolerance: 1e-10,
            scale_max_iterations: 200,
        })
    }

    #[inline]
    pub(crate) fn rho(&self) -> Bisquare {
        Bisquare::new(1.0).expect("unit cutoff")
    }

    pub(crate) fn scale(&self, residuals: &[f64], start: Option<f64>) -> Result<f64> {
        m_scale_with(
            residuals,
            self.rho(),
            self.delta,
            self.scale_tolerance,
            self.scale_max_iterations,
            start,
        )
    }
}

impl Default for SLossConfig {
    fn default() -> Self {
        SLossConfig::new(0.25).expect("default delta")
    }
}

/// S-loss plus penalty at `theta`.
pub fn s_objective(
    theta: &Coefficients,
    data: &Dataset,
    penalty: &PenaltyConfig,
    sloss: &SLossConfig,
) -> Result<f64> {
    if theta.beta.len() != data.p() || penalty.loadings.len() != data.p() {
        return Err(invalid_param("dimension mismatch in S-objective"));
    }
    let r = data.residuals(theta.intercept, &theta.beta);
    let s = sloss.scale(&r, None)?;
    Ok(s * s + penalty.value(&theta.beta))
}

/// Observation weights `psi(r_i / sigma) / (r_i / sigma)` for the M-M step.
pub fn mm_weights(residuals: &[f64], scale: f64, rho: Bisquare) -> Result<Vec<f64>> {
    if scale == 0.0 {
        return Err(PenseError::ExactFit);
    }
    if !(scale > 0.0) {
        return Err(invalid_param(format!("scale must be positive, got {scale}")));
    }
    Ok(residuals.iter().map(|r| rho.weight(r / scale)).collect())
}

/// Inner solver tolerance of the first M-M step.
const INITIAL_INNER_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmConfig {
    pub sloss: SLossConfig,
    /// Stop when the relative objective decrease falls below this value.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub en: EnSolverConfig,
    pub max_backtracks: usize,
}

impl MmConfig {
    pub fn new(sloss: SLossConfig) -> Self {
        MmConfig {
            sloss,
            tolerance: 1e-6,
            max_iterations: 500,
            en: EnSolverConfig::default(),
            max_backtracks: 30,
        }
    }
}

struct Iterate {
    theta: Coefficients,
    residuals: Vec<f64>,
    scale: f64,
    objective: f64,
}

fn evaluate(
    data: &Dataset,
    theta: Coefficients,
    penalty: &PenaltyConfig,
    sloss: &SLossConfig,
    scale_hint: Option<f64>,
) -> Result<Iterate> {
    let residuals = data.residuals(theta.intercept, &theta.beta);
    let scale = sloss.scale(&residuals, scale_hint)?;
    let objective = scale * scale + penalty.value(&theta.beta);
    Ok(Iterate {
        theta,
        residuals,
        scale,
        objective,
    })
}

/// Runs the M-M algorithm from `start` until the relative objective change
/// drops below the tolerance.
pub fn mm_descend(
    start: &Coefficients,
    data: &Dataset,
    penalty: &PenaltyConfig,
    cfg: &MmConfig,
) -> Result<FitResult> {
    mm_run(start, data, penalty, cfg, cfg.max_iterations, None)
}

/// As [`mm_descend`], also returning the objective after every iteration
/// (the first entry is the objective at `start`).
pub fn mm_descend_traced(
    start: &Coefficients,
    data: &Dataset,
    penalty: &PenaltyConfig,
    cfg: &MmConfig,
) -> Result<(FitResult, Vec<f64>)> {
    let mut trace = Vec::new();
    let fit = mm_run(start, data, penalty, cfg, cfg.max_iterations, Some(&mut trace))?;
    Ok((fit, trace))
}

pub(crate) fn mm_run(
    start: &Coefficients,
    data: &Dataset,
    penalty: &PenaltyConfig,
    cfg: &MmConfig,
    max_iterations: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<FitResult> {
    let p = data.p();
    if start.beta.len() != p || penalty.loadings.len() != p {
        return Err(invalid_param("dimension mismatch in M-M start"));
    }
    if !start.intercept.is_finite() || start.beta.iter().any(|b| !b.is_finite()) {
        return Err(invalid_param("M-M start must be finite"));
    }
    let sloss = &cfg.sloss;
    let rho = sloss.rho();
    let mut cur = evaluate(data, start.clone(), penalty, sloss, None)?;
    if let Some(t) = trace.as_deref_mut() {
        t.push(cur.objective);
    }
    let mut iterations = 0;
    let mut converged = false;
    let mut inner = PenaltyConfig {
        lambda: 0.0,
        alpha: penalty.alpha,
        loadings: penalty.loadings.clone(),
    };

    // The inner problems are solved inexactly while the objective still moves
    // a lot; the tolerance tightens to `cfg.en.tolerance` before stopping.
    let floor = cfg.en.tolerance;
    let mut inner_cfg = EnSolverConfig {
        tolerance: floor.max(INITIAL_INNER_TOLERANCE),
        ..cfg.en
    };
    while cur.scale > 0.0 && iterations < max_iterations {
        iterations += 1;
        let w = mm_weights(&cur.residuals, cur.scale, rho)?;
        let (sw, swr2) = w
            .iter()
            .zip(&cur.residuals)
            .fold((0.0, 0.0), |(a, b), (wi, ri)| (a + wi, b + wi * ri * ri));
        inner.lambda = penalty.lambda * swr2 / (2.0 * cur.scale * cur.scale * sw);
        let prob = WeightedEnProblem {
            data,
            weights: Some(&w),
            penalty: &inner,
            warm_start: Some((cur.theta.intercept, &cur.theta.beta)),
        };
        let target = en_solver::solve_unchecked(&prob, &inner_cfg)?;

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let theta = if step == 1.0 {
                Coefficients {
                    intercept: target.intercept,
                    beta: target.beta.clone(),
                }
            } else {
                Coefficients {
                    intercept: cur.theta.intercept + step * (target.intercept - cur.theta.intercept),
                    beta: cur
                        .theta
                        .beta
                        .iter()
                        .zip(&target.beta)
                        .map(|(a, b)| a + step * (b - a))
                        .collect(),
                }
            };
            let cand = evaluate(data, theta, penalty, sloss, Some(cur.scale))?;
            if cand.objective <= cur.objective {
                accepted = Some(cand);
                break;
            }
            step *= 0.5;
        }
        let at_floor = inner_cfg.tolerance <= floor;
        let Some(next) = accepted else {
            if at_floor {
                converged = true;
                break;
            }
            inner_cfg.tolerance = floor;
            continue;
        };
        let decrease = cur.objective - next.objective;
        debug_assert!(decrease >= 0.0);
        cur = next;
        if let Some(t) = trace.as_deref_mut() {
            t.push(cur.objective);
        }
        let relative = decrease / cur.objective.abs().max(f64::MIN_POSITIVE);
        if relative <= cfg.tolerance {
            if at_floor {
                converged = true;
                break;
            }
            inner_cfg.tolerance = floor;
        } else {
            inner_cfg.tolerance = (0.1 * relative).clamp(floor, inner_cfg.tolerance);
        }
    }

    let degenerate = cur.scale == 0.0;
    Ok(FitResult {
        active: active_set(&cur.theta.beta),
        intercept: cur.theta.intercept,
        beta: cur.theta.beta,
        scale: cur.scale,
        objective: cur.objective,
        iterations,
        lambda: penalty.lambda,
        alpha: penalty.alpha,
        degenerate,
        converged: converged || degenerate,
    })
}

/// Intercept-only S-estimate `(mu, sigma)` of the response.
pub fn s_location(y: &[f64], sloss: &SLossConfig) -> Result<(f64, f64)> {
    let data = Dataset::new(nalgebra::DMatrix::zeros(y.len(), 0), y.to_vec())?;
    let mut buf = y.to_vec();
    let start = Coefficients {
        intercept: crate::scale::lower_median(&mut buf),
        beta: Vec::new(),
    };
    let cfg = MmConfig {
        tolerance: 1e-12,
        max_iterations: 1000,
        ..MmConfig::new(*sloss)
    };
    let pen = PenaltyConfig {
        lambda: 0.0,
        alpha: 1.0,
        loadings: Vec::new(),
    };
    let fit = mm_descend(&start, &data, &pen, &cfg)?;
    Ok((fit.intercept, fit.scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use crate::scale::{m_location, MLocationConfig, MScaleSolverConfig};
    use crate::rho::RhoConfig;

    pub(crate) fn linear_data(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = (0..n)
            .map(|i| 0.5 + x[(i, 0)] + 0.5 * x[(i, 1 % p)] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn objective_of_zero_model_is_squared_scale() {
        let d = linear_data(30, 5, 1);
        let sl = SLossConfig::new(0.25).unwrap();
        let mu = m_location(d.y(), &MLocationConfig::default()).unwrap();
        let pen = PenaltyConfig::unit(0.0, 0.5, 5).unwrap();
        let theta = Coefficients {
            intercept: mu,
            beta: vec![0.0; 5],
        };
        let r: Vec<f64> = d.y().iter().map(|y| y - mu).collect();
        let s = crate::scale::m_scale(
            &r,
            &MScaleSolverConfig::new(RhoConfig::new(1.0, 0.25).unwrap()),
        )
        .unwrap();
        assert_abs_diff_eq!(s_objective(&theta, &d, &pen, &sl).unwrap(), s * s, epsilon = 1e-12);
    }

    #[test]
    fn penalty_decomposes_on_zero_column() {
        let mut d = linear_data(30, 3, 2);
        let (mut x, y) = d.clone().into_parts();
        x.column_mut(2).fill(0.0);
        d = Dataset::new(x, y).unwrap();
        let sl = SLossConfig::default();
        let pen = PenaltyConfig::unit(0.3, 1.0, 3).unwrap();
        let a = Coefficients {
            intercept: 0.2,
            beta: vec![0.4, 0.1, 0.0],
        };
        let b = Coefficients {
            intercept: 0.2,
            beta: vec![0.4, 0.1, 2.5],
        };
        let diff = s_objective(&b, &d, &pen, &sl).unwrap() - s_objective(&a, &d, &pen, &sl).unwrap();
        assert_abs_diff_eq!(diff, 0.3 * 2.5, epsilon = 1e-12);
    }

    #[test]
    fn weights_examples() {
        let b = Bisquare::new(1.0).unwrap();
        let w = mm_weights(&[0.0, 2.0, 0.5, -0.5], 1.0, b).unwrap();
        assert_abs_diff_eq!(w[0], 6.0, epsilon = 1e-15);
        assert_eq!(w[1], 0.0);
        assert_abs_diff_eq!(w[2], 3.375, epsilon = 1e-12);
        assert_abs_diff_eq!(w[3], 3.375, epsilon = 1e-12);
        assert!(matches!(mm_weights(&[1.0], 0.0, b), Err(PenseError::ExactFit)));
    }

    #[test]
    fn descent_is_monotone_from_random_starts() {
        let d = linear_data(40, 4, 3);
        let pen = PenaltyConfig::unit(0.05, 0.6, 4).unwrap();
        let cfg = MmConfig::new(SLossConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let start = Coefficients {
                intercept: rng.gen_range(-3.0..3.0),
                beta: (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            };
            let (fit, trace) = mm_descend_traced(&start, &d, &pen, &cfg).unwrap();
            assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-10 * w[0].abs()));
            assert!(fit.objective <= trace[0]);
        }
    }

    #[test]
    fn fixed_point_is_kept() {
        let d = linear_data(60, 2, 4);
        let pen = PenaltyConfig::unit(0.0, 1.0, 2).unwrap();
        let cfg = MmConfig {
            tolerance: 1e-12,
            ..MmConfig::new(SLossConfig::default())
        };
        let first = mm_descend(&Coefficients::zeros(2), &d, &pen, &cfg).unwrap();
        let again = mm_descend(&first.coefficients(), &d, &pen, &cfg).unwrap();
        assert_abs_diff_eq!(again.intercept, first.intercept, epsilon = 1e-5);
        for j in 0..2 {
            assert_abs_diff_eq!(again.beta[j], first.beta[j], epsilon = 1e-5);
        }
    }

    #[test]
    fn s_location_of_symmetric_sample() {
        let y = [-2.0, -1.0, 0.0, 1.0, 2.0, 100.0, -100.0];
        let (mu, s) = s_location(&y, &SLossConfig::default()).unwrap();
        assert_abs_diff_eq!(mu, 0.0, epsilon = 1e-8);
        assert!(s > 0.0);
    }
}
