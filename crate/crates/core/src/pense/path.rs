//! Regularization path of penalized S-estimates.
//!
//! At every penalty level a pool of starting points (the zero model, the
//! elastic-net initial estimates computed at every stride-th level, and the
//! solutions carried over from the previous level) is improved by a few M-M steps. The
//! best distinct candidates are then iterated to convergence and carried
//! forward to the next, smaller, penalty level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::enpy::{en_py_with_ratio, ls_lambda_ratio, EnPyConfig};
use super::{mm_run, s_location, Coefficients, FitResult, MmConfig, SLossConfig};
use crate::data::Dataset;
use crate::en_solver::{log_grid, EnSolverConfig, PenaltyConfig};
use crate::error::{invalid_data, invalid_param, PenseError, Result};
use crate::scale::lower_median;

/// Mixing parameter and loadings shared by every point of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyFamily {
    pub alpha: f64,
    pub loadings: Vec<f64>,
}

impl PenaltyFamily {
    pub fn new(alpha: f64, loadings: Vec<f64>) -> Result<Self> {
        PenaltyConfig::new(0.0, alpha, loadings.clone())?;
        Ok(PenaltyFamily { alpha, loadings })
    }

    pub fn unit(alpha: f64, p: usize) -> Result<Self> {
        PenaltyFamily::new(alpha, vec![1.0; p])
    }

    pub fn at(&self, lambda: f64) -> PenaltyConfig {
        PenaltyConfig {
            lambda,
            alpha: self.alpha,
            loadings: self.loadings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub sloss: SLossConfig,
    /// M-M steps applied to every starting point before screening.
    pub explore_iterations: usize,
    /// Inner solver tolerance while exploring.
    pub explore_en_tolerance: f64,
    /// Number of explored candidates iterated to convergence.
    pub keep_best: usize,
    /// Initial estimates are computed at every `enpy_stride`-th penalty level.
    pub enpy_stride: usize,
    pub use_enpy: bool,
    pub enpy: EnPyConfig,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub en: EnSolverConfig,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            sloss: SLossConfig::default(),
            explore_iterations: 5,
            explore_en_tolerance: 1e-5,
            keep_best: 10,
            enpy_stride: 10,
            use_enpy: true,
            enpy: EnPyConfig::default(),
            tolerance: 1e-6,
            max_iterations: 500,
            en: EnSolverConfig::default(),
        }
    }
}

impl PathConfig {
    pub fn with_delta(delta: f64) -> Result<Self> {
        let sloss = SLossConfig::new(delta)?;
        let mut cfg = PathConfig {
            sloss,
            ..PathConfig::default()
        };
        cfg.enpy.sloss = sloss;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        SLossConfig::new(self.sloss.delta)?;
        if self.keep_best == 0 || self.enpy_stride == 0 {
            return Err(invalid_param("keep_best and enpy_stride must be positive"));
        }
        if !(self.tolerance > 0.0) || !(self.explore_en_tolerance > 0.0) || !(self.en.tolerance > 0.0) {
            return Err(invalid_param("path tolerances must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(invalid_param("max_iterations must be positive"));
        }
        self.enpy.validate()
    }

    fn mm_full(&self) -> MmConfig {
        MmConfig {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            en: self.en,
            ..MmConfig::new(self.sloss)
        }
    }

    fn mm_explore(&self) -> MmConfig {
        MmConfig {
            tolerance: self.tolerance,
            max_iterations: self.explore_iterations,
            en: EnSolverConfig {
                tolerance: self.explore_en_tolerance,
                ..self.en
            },
            ..MmConfig::new(self.sloss)
        }
    }
}

/// Smallest penalty level at which the intercept-only S-estimate is a
/// stationary point of the penalized S-objective. Requires `alpha > 0`.
pub fn s_lambda_max(data: &Dataset, alpha: f64, loadings: &[f64], sloss: &SLossConfig) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid_param(format!("S lambda_max needs alpha in (0, 1], got {alpha}")));
    }
    if loadings.len() != data.p() {
        return Err(invalid_param("loadings length does not match predictors"));
    }
    let (mu, sigma) = s_location(data.y(), sloss)?;
    if sigma == 0.0 {
        return Err(invalid_data("the robust scale of the response is zero"));
    }
    let rho = sloss.rho();
    let r: Vec<f64> = data.y().iter().map(|y| y - mu).collect();
    let w: Vec<f64> = r.iter().map(|ri| rho.weight(ri / sigma)).collect();
    let s: f64 = w.iter().zip(&r).map(|(w, r)| w * r * r).sum();
    let mut best = 0.0f64;
    for (j, &omega) in loadings.iter().enumerate() {
        let g: f64 = data
            .column(j)
            .iter()
            .zip(&r)
            .zip(&w)
            .map(|((x, r), w)| w * r * x)
            .sum();
        best = best.max(2.0 * sigma * sigma * g.abs() / (s * alpha * omega));
    }
    Ok(best)
}

/// Decreasing log-spaced grid of `count` penalty levels ending at
/// `ratio * lambda_max`. For `alpha < 0.1` the head of the grid is the
/// `lambda_max` of the same loadings with `alpha = 0.1`, because no finite
/// penalty zeroes a ridge-type fit.
pub fn path_lambda_grid(
    data: &Dataset,
    family: &PenaltyFamily,
    count: usize,
    ratio: f64,
    sloss: &SLossConfig,
) -> Result<Vec<f64>> {
    if count == 0 || !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid_param("grid needs count > 0 and ratio in (0, 1)"));
    }
    let alpha = family.alpha.max(0.1);
    let max = s_lambda_max(data, alpha, &family.loadings, sloss)?;
    if !(max > 0.0) {
        return Err(invalid_data("response is unrelated to every predictor (lambda_max = 0)"));
    }
    Ok(log_grid(max * (1.0 + 1e-4), ratio, count))
}

fn same_candidate(a: &FitResult, b: &FitResult) -> bool {
    let scale = a.objective.abs().max(b.objective.abs()).max(f64::MIN_POSITIVE);
    if (a.objective - b.objective).abs() > 1e-7 * scale {
        return false;
    }
    let size = a.beta.iter().fold(a.intercept.abs(), |m, v| m.max(v.abs()));
    let tol = 1e-4 * (1.0 + size);
    (a.intercept - b.intercept).abs() <= tol
        && a.beta.iter().zip(&b.beta).all(|(x, y)| (x - y).abs() <= tol)
}

/// Orders by (objective, index), removes near-duplicates and keeps at most
/// `keep`. Degenerate (exact-fit) candidates are kept only if nothing else is
/// left.
fn screen(mut cands: Vec<(usize, FitResult)>, keep: usize) -> Vec<(usize, FitResult)> {
    if cands.iter().any(|c| !c.1.degenerate) {
        cands.retain(|c| !c.1.degenerate);
    }
    cands.sort_by(|a, b| {
        a.1.degenerate
            .cmp(&b.1.degenerate)
            .then(a.1.objective.total_cmp(&b.1.objective))
            .then(a.0.cmp(&b.0))
    });
    let mut out: Vec<(usize, FitResult)> = Vec::with_capacity(keep);
    for c in cands {
        if out.len() == keep {
            break;
        }
        if !out.iter().any(|k| same_candidate(&k.1, &c.1)) {
            out.push(c);
        }
    }
    out
}

/// Penalized S-estimates along `lambdas` (processed in the given order,
/// normally decreasing). A level where every candidate fails is reported as
/// an error entry and the path continues.
pub fn regularization_path(
    data: &Dataset,
    lambdas: &[f64],
    family: &PenaltyFamily,
    cfg: &PathConfig,
) -> Result<Vec<Result<FitResult>>> {
    cfg.validate()?;
    PenaltyConfig::new(0.0, family.alpha, family.loadings.clone())?;
    if family.loadings.len() != data.p() {
        return Err(invalid_param("loadings length does not match predictors"));
    }
    if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(invalid_param(format!("penalty levels must be finite and non-negative, got {l}")));
    }

    let mut ybuf = data.y().to_vec();
    let zero = Coefficients {
        intercept: lower_median(&mut ybuf),
        beta: vec![0.0; data.p()],
    };

    // Initial estimates at every stride-th level.
    let enpy_at: Vec<usize> = if cfg.use_enpy {
        (0..lambdas.len()).step_by(cfg.enpy_stride).collect()
    } else {
        Vec::new()
    };
    let enpy_cfg = EnPyConfig {
        sloss: cfg.sloss,
        ..cfg.enpy.clone()
    };
    let ratio = if enpy_at.is_empty() {
        1.0
    } else {
        ls_lambda_ratio(data, &family.loadings, &cfg.sloss).unwrap_or(1.0)
    };
    let sets: Vec<Vec<Coefficients>> = enpy_at
        .par_iter()
        .map(|&k| en_py_with_ratio(data, &family.at(lambdas[k]), ratio, &enpy_cfg).unwrap_or_default())
        .collect();
    let mut pooled: Vec<Coefficients> = Vec::new();
    for c in sets.into_iter().flatten() {
        if !pooled.contains(&c) {
            pooled.push(c);
        }
    }

    let explore = cfg.mm_explore();
    let full = cfg.mm_full();
    let mut carried: Vec<Coefficients> = Vec::new();
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let pen = family.at(lambda);
        let mut starts = Vec::with_capacity(1 + pooled.len() + carried.len());
        starts.push(zero.clone());
        starts.extend(pooled.iter().cloned());
        starts.append(&mut carried);

        let explored: Vec<(usize, FitResult)> = starts
            .par_iter()
            .enumerate()
            .filter_map(|(i, s)| {
                mm_run(s, data, &pen, &explore, explore.max_iterations, None)
                    .ok()
                    .map(|f| (i, f))
            })
            .collect();
        let screened = screen(explored, cfg.keep_best);
        let refined: Vec<(usize, FitResult)> = screened
            .par_iter()
            .filter_map(|(i, f)| {
                mm_run(&f.coefficients(), data, &pen, &full, full.max_iterations, None)
                    .ok()
                    .map(|g| (*i, g))
            })
            .collect();
        let finals = screen(refined, cfg.keep_best);
        carried = finals.iter().map(|(_, f)| f.coefficients()).collect();
        out.push(match finals.into_iter().next() {
            Some((_, f)) => Ok(f),
            None => Err(PenseError::Convergence {
                what: "penalized S-estimate",
                iterations: 0,
                last: lambda,
            }),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pense::{mm_descend, s_objective, MmConfig};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn sample(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = (0..n)
            .map(|i| 1.0 + 1.5 * x[(i, 0)] - x[(i, 1)] + 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn lambda_max_zeroes_the_path_head() {
        let d = sample(50, 6, 1);
        let fam = PenaltyFamily::unit(0.8, 6).unwrap();
        let sl = SLossConfig::default();
        let grid = path_lambda_grid(&d, &fam, 5, 1e-2, &sl).unwrap();
        let path = regularization_path(&d, &grid, &fam, &PathConfig::default()).unwrap();
        let head = path[0].as_ref().unwrap();
        assert!(head.beta.iter().all(|b| *b == 0.0));
        // The M-M stopping rule is on the objective, so the location is only
        // accurate to roughly the square root of the tolerance.
        let (mu, sigma) = s_location(d.y(), &sl).unwrap();
        assert!((head.intercept - mu).abs() < 1e-2 * sigma, "{} vs {mu}", head.intercept);
        assert!(path[4].as_ref().unwrap().active.len() >= 2);
    }

    #[test]
    fn s_lambda_max_scales_inversely_with_loadings() {
        let d = sample(40, 4, 2);
        let sl = SLossConfig::default();
        let a = s_lambda_max(&d, 0.5, &[1.0; 4], &sl).unwrap();
        let b = s_lambda_max(&d, 0.5, &[2.0; 4], &sl).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-10 * a);
        assert!(s_lambda_max(&d, 0.0, &[1.0; 4], &sl).is_err());
    }

    #[test]
    fn path_improves_on_every_single_start() {
        let d = sample(40, 5, 3);
        let fam = PenaltyFamily::unit(0.7, 5).unwrap();
        let cfg = PathConfig::default();
        let grid = path_lambda_grid(&d, &fam, 12, 1e-2, &cfg.sloss).unwrap();
        let path = regularization_path(&d, &grid, &fam, &cfg).unwrap();
        let mm = MmConfig::new(cfg.sloss);
        for (k, entry) in path.iter().enumerate().step_by(4) {
            let fit = entry.as_ref().unwrap();
            let pen = fam.at(grid[k]);
            let zero = mm_descend(&Coefficients::zeros(5), &d, &pen, &mm).unwrap();
            assert!(fit.objective <= zero.objective * (1.0 + 1e-6));
            let obj = s_objective(&fit.coefficients(), &d, &pen, &cfg.sloss).unwrap();
            assert!((obj - fit.objective).abs() < 1e-9 * obj);
        }
    }

    #[test]
    fn ridge_grid_uses_proxy_alpha() {
        let d = sample(40, 4, 4);
        let sl = SLossConfig::default();
        let ridge = path_lambda_grid(&d, &PenaltyFamily::unit(0.0, 4).unwrap(), 3, 1e-3, &sl).unwrap();
        let tenth = path_lambda_grid(&d, &PenaltyFamily::unit(0.1, 4).unwrap(), 3, 1e-3, &sl).unwrap();
        assert_eq!(ridge, tenth);
    }
}
