//! Robust hyper-parameter selection.
//!
//! Predictors are centered by an M-estimate of location and scaled to unit
//! M-scale; the response is centered only. Hyper-parameters are chosen by
//! repeated K-fold cross-validation in which every replication pools its
//! out-of-fold prediction errors and summarizes them by a tau-scale.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid_data, invalid_param, Result};
use crate::pense::{
    adaptive_loadings, path_lambda_grid, regularization_path, FitResult, PathConfig, PenaltyFamily,
};
use crate::rho::RhoConfig;
use crate::scale::{m_location, m_scale, tau_scale, MLocationConfig, MScaleSolverConfig, TauScaleConfig};

/// Breakdown parameter of the M-scale used to scale predictors.
const STANDARDIZE_DELTA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationRecord {
    pub response_center: f64,
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
}

impl StandardizationRecord {
    pub fn identity(p: usize) -> Self {
        StandardizationRecord {
            response_center: 0.0,
            centers: vec![0.0; p],
            scales: vec![1.0; p],
        }
    }

    /// Applies the recorded transformation to new data.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.p() != self.centers.len() {
            return Err(invalid_param("standardization record has wrong dimension"));
        }
        let mut x = data.x().clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let (c, s) = (self.centers[j], self.scales[j]);
            col.apply(|v| *v = (*v - c) / s);
        }
        let y = data.y().iter().map(|v| v - self.response_center).collect();
        Dataset::new(x, y)
    }

    /// Coefficients on the original scale from standardized-space coefficients.
    pub fn to_original(&self, intercept: f64, beta: &[f64]) -> (f64, Vec<f64>) {
        let b: Vec<f64> = beta.iter().zip(&self.scales).map(|(b, s)| b / s).collect();
        let shift: f64 = b.iter().zip(&self.centers).map(|(b, c)| b * c).sum();
        (self.response_center + intercept - shift, b)
    }
}

/// Robustly standardizes the predictors and centers the response.
pub fn standardize(data: &Dataset) -> Result<(Dataset, StandardizationRecord)> {
    let loc = MLocationConfig::default();
    let scfg = MScaleSolverConfig::new(RhoConfig::consistent(STANDARDIZE_DELTA)?);
    let p = data.p();
    let mut centers = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    let mut constant = Vec::new();
    for j in 0..p {
        let col = data.column(j);
        let c = m_location(col, &loc)?;
        let dev: Vec<f64> = col.iter().map(|v| v - c).collect();
        let s = m_scale(&dev, &scfg)?;
        if !(s > 0.0 && s.is_finite()) {
            constant.push(j);
        }
        centers.push(c);
        scales.push(s);
    }
    if !constant.is_empty() {
        return Err(invalid_data(format!(
            "predictors with zero robust scale (constant columns): {constant:?}"
        )));
    }
    let rec = StandardizationRecord {
        response_center: m_location(data.y(), &loc)?,
        centers,
        scales,
    };
    let std = rec.apply(data)?;
    Ok((std, rec))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CvScore {
    /// Tau-scale of the pooled out-of-fold errors.
    Tau { c_tau: f64 },
    /// Root mean squared out-of-fold error.
    RootMeanSquared,
}

impl CvScore {
    fn evaluate(&self, errors: &[f64]) -> Result<f64> {
        match *self {
            CvScore::Tau { c_tau } => tau_scale(errors, &TauScaleConfig { c_tau }),
            CvScore::RootMeanSquared => {
                Ok((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub replications: usize,
    pub seed: u64,
    pub score: CvScore,
    pub alphas: Vec<f64>,
    pub zetas: Vec<f64>,
    pub n_lambda: usize,
    pub lambda_ratio: f64,
    pub ridge_lambda_ratio: f64,
    /// Two-stage adaptive estimator; `false` fits the non-adaptive estimator.
    pub adaptive: bool,
    pub loading_cap: f64,
    pub standardize: bool,
    /// Worker threads; `None` uses the global pool. Output does not depend
    /// on it, so it is left out of serialized configurations.
    #[serde(skip)]
    pub threads: Option<usize>,
    pub path: PathConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            replications: 10,
            seed: 0,
            score: CvScore::Tau { c_tau: 3.0 },
            alphas: vec![0.5, 0.75, 1.0],
            zetas: vec![1.0, 2.0],
            n_lambda: 50,
            lambda_ratio: 1e-3,
            ridge_lambda_ratio: 1e-3,
            adaptive: true,
            loading_cap: 1e8,
            standardize: true,
            threads: None,
            path: PathConfig::default(),
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 || self.replications < 1 {
            return Err(invalid_param("need at least 2 folds and 1 replication"));
        }
        if self.n_lambda == 0 {
            return Err(invalid_param("n_lambda must be positive"));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(invalid_param("alphas must lie in (0, 1]"));
        }
        if self.adaptive && (self.zetas.is_empty() || self.zetas.iter().any(|z| !(*z >= 1.0) || !z.is_finite())) {
            return Err(invalid_param("zetas must be finite and at least 1"));
        }
        if let CvScore::Tau { c_tau } = self.score {
            if !(c_tau > 0.0) {
                return Err(invalid_param("c_tau must be positive"));
            }
        }
        if !(self.loading_cap > 0.0) {
            return Err(invalid_param("loading cap must be positive"));
        }
        if self.threads == Some(0) {
            return Err(invalid_param("threads must be positive"));
        }
        self.path.validate()
    }
}

/// One `(alpha, zeta)` pair with its loadings and penalty grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPair {
    pub alpha: f64,
    pub zeta: Option<f64>,
    pub loadings: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl HyperPair {
    fn family(&self) -> PenaltyFamily {
        PenaltyFamily {
            alpha: self.alpha,
            loadings: self.loadings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub lambda: f64,
    pub alpha: f64,
    pub zeta: Option<f64>,
    pub mean: f64,
    /// Standard deviation of the replication scores.
    pub se: f64,
    /// Active-set size of the full-data fit.
    pub active: usize,
    /// Replications that contributed to `mean`.
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSurface {
    pub entries: Vec<CvEntry>,
    /// Replications in which at least one fold failed.
    pub failed_replications: Vec<usize>,
}

/// Fold label of every observation for replication `rep`.
pub fn fold_assignment(n: usize, folds: usize, seed: u64, rep: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut out = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        out[i] = pos % folds;
    }
    out
}

/// Out-of-fold errors of one fold: `[pair][lambda] -> errors` for the test rows.
type FoldErrors = Vec<Vec<Option<Vec<f64>>>>;

fn fold_errors(
    data: &Dataset,
    labels: &[usize],
    fold: usize,
    pairs: &[HyperPair],
    cfg: &CvConfig,
) -> Result<(Vec<usize>, FoldErrors)> {
    let train_idx: Vec<usize> = (0..data.n()).filter(|&i| labels[i] != fold).collect();
    let test_idx: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == fold).collect();
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);
    let (train, rec) = if cfg.standardize {
        standardize(&train)?
    } else {
        (train, StandardizationRecord::identity(data.p()))
    };
    let mut out = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let path = regularization_path(&train, &pair.lambdas, &pair.family(), &cfg.path)?;
        out.push(
            path.into_iter()
                .map(|entry| {
                    entry.ok().map(|fit| {
                        let (mu, beta) = rec.to_original(fit.intercept, &fit.beta);
                        test.residuals(mu, &beta)
                    })
                })
                .collect(),
        );
    }
    Ok((test_idx, out))
}

struct CvRun {
    surface: CvSurface,
    paths: Vec<Vec<Result<FitResult>>>,
}

pub(crate) fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| invalid_param(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn cv_run(data: &Dataset, pairs: &[HyperPair], cfg: &CvConfig) -> Result<CvRun> {
    cfg.validate()?;
    let n = data.n();
    if n < 2 * cfg.folds {
        return Err(invalid_param(format!(
            "{} folds need at least {} observations, got {n}",
            cfg.folds,
            2 * cfg.folds
        )));
    }
    if pairs.is_empty() {
        return Err(invalid_param("empty hyper-parameter grid"));
    }
    let (r, k) = (cfg.replications, cfg.folds);
    let labels: Vec<Vec<usize>> = (0..r).map(|rep| fold_assignment(n, k, cfg.seed, rep)).collect();
    let units: Vec<(usize, usize)> = (0..r).flat_map(|rep| (0..k).map(move |f| (rep, f))).collect();

    let (folds, paths) = in_pool(cfg.threads, || {
        let folds: Vec<Result<(Vec<usize>, FoldErrors)>> = units
            .par_iter()
            .map(|&(rep, f)| fold_errors(data, &labels[rep], f, pairs, cfg))
            .collect();
        let paths: Vec<Result<Vec<Result<FitResult>>>> = pairs
            .iter()
            .map(|pair| regularization_path(data, &pair.lambdas, &pair.family(), &cfg.path))
            .collect();
        (folds, paths)
    })?;
    let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;

    // scores[pair][lambda] -> per-replication score (None if missing)
    let mut scores: Vec<Vec<Vec<Option<f64>>>> = pairs
        .iter()
        .map(|p| vec![Vec::with_capacity(r); p.lambdas.len()])
        .collect();
    let mut failed = Vec::new();
    for rep in 0..r {
        let chunk = &folds[rep * k..(rep + 1) * k];
        let mut rep_failed = chunk.iter().any(|f| f.is_err());
        for (pi, pair) in pairs.iter().enumerate() {
            for li in 0..pair.lambdas.len() {
                let mut errors = vec![f64::NAN; n];
                let mut complete = !rep_failed;
                if complete {
                    for f in chunk.iter().flatten() {
                        let (idx, errs) = f;
                        match &errs[pi][li] {
                            Some(e) => {
                                for (&i, &v) in idx.iter().zip(e) {
                                    errors[i] = v;
                                }
                            }
                            None => complete = false,
                        }
                    }
                }
                let score = if complete { cfg.score.evaluate(&errors).ok() } else { None };
                if score.is_none() {
                    rep_failed = true;
                }
                scores[pi][li].push(score);
            }
        }
        if rep_failed {
            failed.push(rep);
        }
    }

    let mut entries = Vec::new();
    for (pi, pair) in pairs.iter().enumerate() {
        for (li, &lambda) in pair.lambdas.iter().enumerate() {
            let vals: Vec<f64> = scores[pi][li].iter().flatten().copied().collect();
            let m = vals.len();
            let (mean, se) = if m == 0 {
                (f64::INFINITY, 0.0)
            } else {
                let mean = vals.iter().sum::<f64>() / m as f64;
                // Spread of the replication scores: the standard error of a
                // single replication's estimate, not of their mean.
                let se = if m > 1 {
                    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
                    var.sqrt()
                } else {
                    0.0
                };
                (mean, se)
            };
            let active = match &paths[pi][li] {
                Ok(f) => f.active.len(),
                Err(_) => usize::MAX,
            };
            entries.push(CvEntry {
                lambda,
                alpha: pair.alpha,
                zeta: pair.zeta,
                mean,
                se,
                active,
                replications: m,
            });
        }
    }
    Ok(CvRun {
        surface: CvSurface {
            entries,
            failed_replications: failed,
        },
        paths,
    })
}

/// Repeated K-fold CV of the penalized S-estimator over every pair and its
/// penalty grid. All pairs share the fold assignment of a replication.
/// Training folds are re-standardized when `cfg.standardize` is set, so
/// `data` is normally already standardized.
pub fn repeated_kfold(data: &Dataset, pairs: &[HyperPair], cfg: &CvConfig) -> Result<CvSurface> {
    Ok(cv_run(data, pairs, cfg)?.surface)
}

fn check_surface(surface: &CvSurface) -> Result<()> {
    if surface.entries.is_empty() {
        return Err(invalid_param("empty CV surface"));
    }
    if surface.entries.iter().all(|e| !e.mean.is_finite()) {
        return Err(invalid_data("cross-validation failed for every hyper-parameter"));
    }
    Ok(())
}

/// Index of the entry with the smallest mean score (first on ties).
pub fn select_min(surface: &CvSurface) -> Result<usize> {
    check_surface(surface)?;
    let mut best = 0;
    for (i, e) in surface.entries.iter().enumerate() {
        if e.mean < surface.entries[best].mean {
            best = i;
        }
    }
    Ok(best)
}

/// Sparsest entry whose mean score is within one standard error of the
/// minimum; ties go to the larger penalty, then the larger alpha.
pub fn select_one_se(surface: &CvSurface) -> Result<usize> {
    let best = select_min(surface)?;
    let b = &surface.entries[best];
    let limit = b.mean + b.se;
    let mut pick = best;
    for (i, e) in surface.entries.iter().enumerate() {
        if e.mean > limit {
            continue;
        }
        let c = &surface.entries[pick];
        let better = e.active < c.active
            || (e.active == c.active && (e.lambda > c.lambda || (e.lambda == c.lambda && e.alpha > c.alpha)));
        if better {
            pick = i;
        }
    }
    Ok(pick)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedHyper {
    pub lambda: f64,
    pub alpha: f64,
    pub zeta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvFit {
    /// Selected fit with coefficients on the original scale.
    pub fit: FitResult,
    pub standardized_fit: FitResult,
    pub selected: SelectedHyper,
    pub surface: CvSurface,
    pub ridge_surface: Option<CvSurface>,
    pub preliminary: Option<FitResult>,
    pub record: StandardizationRecord,
}

/// Builds one pair per alpha (and zeta) with its own penalty grid.
pub(crate) fn build_pairs(
    data: &Dataset,
    cfg: &CvConfig,
    preliminary: Option<&[f64]>,
) -> Result<Vec<HyperPair>> {
    let mut pairs = Vec::new();
    for &alpha in &cfg.alphas {
        let zetas: Vec<Option<f64>> = match preliminary {
            Some(_) => cfg.zetas.iter().map(|z| Some(*z)).collect(),
            None => vec![None],
        };
        for zeta in zetas {
            let loadings = match (preliminary, zeta) {
                (Some(b), Some(z)) => adaptive_loadings(b, z, cfg.loading_cap)?,
                _ => vec![1.0; data.p()],
            };
            let family = PenaltyFamily::new(alpha, loadings)?;
            let lambdas = path_lambda_grid(data, &family, cfg.n_lambda, cfg.lambda_ratio, &cfg.path.sloss)?;
            pairs.push(HyperPair {
                alpha,
                zeta,
                loadings: family.loadings,
                lambdas,
            });
        }
    }
    Ok(pairs)
}

pub(crate) fn ridge_pair(data: &Dataset, cfg: &CvConfig) -> Result<HyperPair> {
    let family = PenaltyFamily::unit(0.0, data.p())?;
    let lambdas = path_lambda_grid(data, &family, cfg.n_lambda, cfg.ridge_lambda_ratio, &cfg.path.sloss)?;
    Ok(HyperPair {
        alpha: 0.0,
        zeta: None,
        loadings: family.loadings,
        lambdas,
    })
}

fn pick(run: &CvRun, pairs: &[HyperPair], idx: usize) -> Result<(FitResult, SelectedHyper)> {
    let mut offset = 0;
    for (pi, pair) in pairs.iter().enumerate() {
        if idx < offset + pair.lambdas.len() {
            let li = idx - offset;
            let fit = match &run.paths[pi][li] {
                Ok(f) => f.clone(),
                Err(e) => return Err(invalid_data(format!("selected fit failed: {e}"))),
            };
            return Ok((
                fit,
                SelectedHyper {
                    lambda: pair.lambdas[li],
                    alpha: pair.alpha,
                    zeta: pair.zeta,
                },
            ));
        }
        offset += pair.lambdas.len();
    }
    Err(invalid_param("selection index out of range"))
}

/// Stage-1 ridge CV: the fit minimizing the CV score along the ridge path.
pub(crate) fn ridge_stage(data: &Dataset, cfg: &CvConfig) -> Result<(FitResult, CvSurface)> {
    min_stage(data, &[ridge_pair(data, cfg)?], cfg)
}

/// CV over `pairs` selecting the plain minimizer of the mean score.
pub(crate) fn min_stage(data: &Dataset, pairs: &[HyperPair], cfg: &CvConfig) -> Result<(FitResult, CvSurface)> {
    let run = cv_run(data, pairs, cfg)?;
    let idx = select_min(&run.surface)?;
    let (fit, _) = pick(&run, pairs, idx)?;
    Ok((fit, run.surface))
}

/// Stage-2 CV over the given pairs with the one-SE rule.
pub(crate) fn select_stage(
    data: &Dataset,
    pairs: &[HyperPair],
    cfg: &CvConfig,
) -> Result<(FitResult, SelectedHyper, CvSurface)> {
    let run = cv_run(data, pairs, cfg)?;
    let idx = select_one_se(&run.surface)?;
    let (fit, sel) = pick(&run, pairs, idx)?;
    Ok((fit, sel, run.surface))
}

/// Full pipeline: standardize, choose the preliminary ridge fit by CV (for
/// the adaptive estimator), cross-validate every `(alpha, zeta)` pair on its
/// own grid, and refit the selected hyper-parameters on the full data.
pub fn fit_with_cv(data: &Dataset, cfg: &CvConfig) -> Result<CvFit> {
    cfg.validate()?;
    let (std, record) = if cfg.standardize {
        standardize(data)?
    } else {
        (data.clone(), StandardizationRecord::identity(data.p()))
    };
    let (preliminary, ridge_surface) = if cfg.adaptive {
        let (fit, surface) = ridge_stage(&std, cfg)?;
        (Some(fit), Some(surface))
    } else {
        (None, None)
    };
    let pairs = build_pairs(&std, cfg, preliminary.as_ref().map(|f| f.beta.as_slice()))?;
    let (standardized_fit, selected, surface) = select_stage(&std, &pairs, cfg)?;
    let (intercept, beta) = record.to_original(standardized_fit.intercept, &standardized_fit.beta);
    let fit = FitResult {
        intercept,
        beta,
        ..standardized_fit.clone()
    };
    Ok(CvFit {
        fit,
        standardized_fit,
        selected,
        surface,
        ridge_surface,
        preliminary,
        record,
    })
}
