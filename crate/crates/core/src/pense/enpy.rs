//! Initial estimates from elastic-net fits on cleaned sub-samples.
//!
//! Observations are removed according to principal sensitivity components:
//! the leading eigenvectors of `E E'`, where column `j` of `E` is the change in
//! fitted values when observation `j` is left out of a least-squares elastic-net
//! fit. Extreme entries of a component mark observations with a large joint
//! influence on the fit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::path::s_lambda_max;
use super::{s_objective, Coefficients, SLossConfig};
use crate::data::Dataset;
use crate::en_solver::{self, EnSolverConfig, PenaltyConfig, WeightedEnProblem};
use crate::error::{invalid_param, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnPyConfig {
    /// Maximum number of sensitivity components per iteration.
    pub components: usize,
    /// Quantiles of `|component|` above which observations are removed.
    pub quantiles: Vec<f64>,
    pub iterations: usize,
    pub sloss: SLossConfig,
    pub en: EnSolverConfig,
}

impl Default for EnPyConfig {
    fn default() -> Self {
        EnPyConfig {
            components: 10,
            quantiles: vec![0.90, 0.95],
            iterations: 2,
            sloss: SLossConfig::default(),
            en: EnSolverConfig::default(),
        }
    }
}

impl EnPyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 || self.iterations == 0 {
            return Err(invalid_param("EN-PY needs at least one component and one iteration"));
        }
        if self.quantiles.is_empty() || self.quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(invalid_param("EN-PY quantiles must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Ratio between the least-squares and S-loss penalty scales, taken from the
/// respective smallest penalties that zero every coefficient.
pub(crate) fn ls_lambda_ratio(data: &Dataset, loadings: &[f64], sloss: &SLossConfig) -> Result<f64> {
    let ls = en_solver::lambda_max(data, None, 1.0, loadings)?;
    let s = s_lambda_max(data, 1.0, loadings, sloss)?;
    let ratio = ls / s;
    Ok(if ratio.is_finite() && ratio > 0.0 { ratio } else { 1.0 })
}

/// Candidate starting points for the penalty `penalty` (on the S-loss scale).
///
/// The first entry is always the elastic-net fit on the full sample; the rest
/// are the best sub-sample fits ranked by the penalized S-objective.
pub fn en_py_initial_estimates(
    data: &Dataset,
    penalty: &PenaltyConfig,
    cfg: &EnPyConfig,
) -> Result<Vec<Coefficients>> {
    cfg.validate()?;
    penalty.validate()?;
    let ratio = ls_lambda_ratio(data, &penalty.loadings, &cfg.sloss)?;
    en_py_with_ratio(data, penalty, ratio, cfg)
}

pub(crate) fn en_py_with_ratio(
    data: &Dataset,
    penalty: &PenaltyConfig,
    ratio: f64,
    cfg: &EnPyConfig,
) -> Result<Vec<Coefficients>> {
    let n = data.n();
    let ls_pen = penalty.with_lambda(penalty.lambda * ratio);
    let solve = |mask: Option<&[f64]>, warm: Option<&Coefficients>| -> Result<Coefficients> {
        let mut prob = WeightedEnProblem::new(data, &ls_pen);
        if let Some(m) = mask {
            prob = prob.weights(m);
        }
        if let Some(w) = warm {
            prob = prob.warm_start(w.intercept, &w.beta);
        }
        let sol = en_solver::solve_unchecked(&prob, &cfg.en)?;
        Ok(Coefficients {
            intercept: sol.intercept,
            beta: sol.beta,
        })
    };

    let full = solve(None, None)?;
    let min_size = (n + 1) / 2;
    let mut pool: Vec<Coefficients> = Vec::new();
    let mut mask = vec![1.0; n];
    let mut base = full.clone();

    for it in 0..cfg.iterations {
        if it > 0 {
            base = solve(Some(&mask), Some(&base))?;
            pool.push(base.clone());
        }
        let comps = sensitivity_components(data, &mask, &base, &ls_pen, cfg.components);
        let kept: Vec<usize> = (0..n).filter(|&i| mask[i] > 0.0).collect();
        for u in &comps {
            let mut mags: Vec<f64> = kept.iter().map(|&i| u[i].abs()).collect();
            mags.sort_by(f64::total_cmp);
            for &q in &cfg.quantiles {
                let pos = ((q * mags.len() as f64).ceil() as usize).clamp(1, mags.len()) - 1;
                let thr = mags[pos];
                let mut sub = mask.clone();
                let mut removed = 0;
                for &i in &kept {
                    if u[i].abs() > thr {
                        sub[i] = 0.0;
                        removed += 1;
                    }
                }
                if removed == 0 || kept.len() - removed < min_size {
                    continue;
                }
                pool.push(solve(Some(&sub), Some(&base))?);
            }
        }
        if it + 1 == cfg.iterations {
            break;
        }
        // Next iteration: keep observations with non-zero M-M weight under
        // the best candidate so far.
        let best = best_by_objective(data, penalty, &cfg.sloss, std::iter::once(&full).chain(&pool))?;
        let r = data.residuals(best.intercept, &best.beta);
        let sigma = cfg.sloss.scale(&r, None)?;
        if sigma == 0.0 {
            break;
        }
        let next: Vec<f64> = r.iter().map(|ri| if ri.abs() < sigma { 1.0 } else { 0.0 }).collect();
        if (next.iter().sum::<f64>() as usize) < min_size {
            break;
        }
        mask = next;
    }

    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(pool.len());
    for (k, c) in pool.iter().enumerate() {
        let obj = s_objective(c, data, penalty, &cfg.sloss)?;
        scored.push((obj, k));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let keep = cfg.components * cfg.quantiles.len();
    let mut out = vec![full];
    for (_, k) in scored {
        if out.len() > keep {
            break;
        }
        if !out.iter().any(|c| *c == pool[k]) {
            out.push(pool[k].clone());
        }
    }
    Ok(out)
}

fn best_by_objective<'a>(
    data: &Dataset,
    penalty: &PenaltyConfig,
    sloss: &SLossConfig,
    cands: impl Iterator<Item = &'a Coefficients>,
) -> Result<&'a Coefficients> {
    let mut best: Option<(f64, &Coefficients)> = None;
    for c in cands {
        let obj = s_objective(c, data, penalty, sloss)?;
        if best.map_or(true, |(b, _)| obj < b) {
            best = Some((obj, c));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

/// Leading principal sensitivity components of the fit `theta` on the
/// observations with non-zero `mask`. Each returned vector has length `n`
/// with zeros outside the mask. Returns nothing when the active-set ridge
/// system is singular or has at least as many columns as observations.
fn sensitivity_components(
    data: &Dataset,
    mask: &[f64],
    theta: &Coefficients,
    penalty: &PenaltyConfig,
    max_components: usize,
) -> Vec<Vec<f64>> {
    let idx: Vec<usize> = (0..data.n()).filter(|&i| mask[i] > 0.0).collect();
    let active: Vec<usize> = (0..data.p()).filter(|&j| theta.beta[j] != 0.0).collect();
    let (m, k) = (idx.len(), active.len() + 1);
    if k >= m {
        return Vec::new();
    }
    let mf = m as f64;
    let b = DMatrix::from_fn(m, k, |i, c| {
        if c == 0 {
            1.0
        } else {
            data.x()[(idx[i], active[c - 1])]
        }
    });
    let mut gram = b.tr_mul(&b) / mf;
    for (c, &j) in active.iter().enumerate() {
        gram[(c + 1, c + 1)] += penalty.lambda * (1.0 - penalty.alpha) * penalty.loadings[j];
    }
    let Some(chol) = gram.cholesky() else {
        return Vec::new();
    };
    let g = chol.inverse();
    let r = data.residuals(theta.intercept, &theta.beta);
    let bg = &b * &g;
    // Leave-one-out residuals r_i / (1 - h_ii).
    let mut db = b.clone();
    for i in 0..m {
        let h = bg.row(i).dot(&b.row(i)) / mf;
        let d = r[idx[i]] / (1.0 - h).max(1e-4);
        db.row_mut(i).scale_mut(d);
    }
    let dtd = db.tr_mul(&db);
    let c = &g * dtd * &g / (mf * mf);
    let qr = b.qr();
    let q = qr.q();
    let rr = qr.r();
    let inner = &rr * c * rr.transpose();
    let inner = (&inner + inner.transpose()) * 0.5;
    let eig = inner.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    if !(top > 0.0) {
        return Vec::new();
    }
    order
        .into_iter()
        .take(max_components)
        .filter(|&c| eig.eigenvalues[c] > 1e-12 * top)
        .map(|c| {
            let u = &q * eig.eigenvectors.column(c);
            let mut full = vec![0.0; data.n()];
            for (pos, &i) in idx.iter().enumerate() {
                full[i] = u[pos];
            }
            full
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn contaminated(n: usize, p: usize, bad: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut y: Vec<f64> = (0..n)
            .map(|i| 2.0 * x[(i, 0)] + 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for i in 0..bad {
            x[(i, 1)] = 8.0;
            y[i] = -30.0;
        }
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn components_match_dense_eigendecomposition() {
        let d = contaminated(30, 3, 0, 1);
        let pen = PenaltyConfig::unit(0.02, 0.5, 3).unwrap();
        let sol = en_solver::solve_weighted_en(
            &WeightedEnProblem::new(&d, &pen),
            &EnSolverConfig {
                tolerance: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        let theta = Coefficients {
            intercept: sol.intercept,
            beta: sol.beta.clone(),
        };
        let comps = sensitivity_components(&d, &vec![1.0; 30], &theta, &pen, 10);
        assert!(!comps.is_empty());

        // Dense oracle: explicit hat matrix and E E'.
        let active: Vec<usize> = (0..3).filter(|&j| sol.beta[j] != 0.0).collect();
        let k = active.len() + 1;
        let b = DMatrix::from_fn(30, k, |i, c| if c == 0 { 1.0 } else { d.x()[(i, active[c - 1])] });
        let mut gram = b.transpose() * &b / 30.0;
        for c in 1..k {
            gram[(c, c)] += 0.02 * 0.5;
        }
        let h = &b * gram.try_inverse().unwrap() * b.transpose() / 30.0;
        let r = DVector::from_vec(d.residuals(sol.intercept, &sol.beta));
        let e = DMatrix::from_fn(30, 30, |i, j| h[(i, j)] * r[j] / (1.0 - h[(j, j)]));
        let eet = &e * e.transpose();
        let eig = eet.symmetric_eigen();
        let imax = (0..30).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
        let v = eig.eigenvectors.column(imax);
        let dot: f64 = comps[0].iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-8, "alignment {dot}");
    }

    #[test]
    fn first_candidate_is_full_fit_and_sizes_are_bounded() {
        let d = contaminated(60, 5, 6, 2);
        let pen = PenaltyConfig::unit(0.05, 0.8, 5).unwrap();
        let cfg = EnPyConfig::default();
        let cands = en_py_initial_estimates(&d, &pen, &cfg).unwrap();
        assert!(cands.len() <= 1 + cfg.components * cfg.quantiles.len());
        assert!(cands.len() > 1);
        let ratio = ls_lambda_ratio(&d, &pen.loadings, &cfg.sloss).unwrap();
        let ls = pen.with_lambda(pen.lambda * ratio);
        let full = en_solver::solve_weighted_en(&WeightedEnProblem::new(&d, &ls), &cfg.en).unwrap();
        assert_eq!(cands[0].beta, full.beta);
    }

    #[test]
    fn some_candidate_ignores_the_outliers() {
        let d = contaminated(60, 5, 6, 3);
        let pen = PenaltyConfig::unit(0.01, 0.8, 5).unwrap();
        let cands = en_py_initial_estimates(&d, &pen, &EnPyConfig::default()).unwrap();
        // The full fit is pulled toward the outliers on predictor 1.
        assert!(cands[0].beta[1].abs() > 0.5);
        assert!(cands.iter().any(|c| (c.beta[0] - 2.0).abs() < 0.5 && c.beta[1].abs() < 0.3));
    }
}
