//! Seeded synthetic data for simulation studies.
//!
//! Three designs are provided: grouped, highly correlated predictors driven
//! by a few heavy-tailed latent variables (`Scenario::One`); AR(1)-correlated
//! heavy-tailed predictors with a larger contamination fraction
//! (`Scenario::Alternative`); and a small design with independent predictors
//! where a knob controls the size of good-leverage points in a few irrelevant
//! predictors (`generate_good_leverage_example`).

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid_param, Result};
use crate::scale::{tau_scale, TauScaleConfig};

/// Draws used for population quantities (error and signal tau-scales).
const POPULATION_DRAWS: usize = 1_000_000;
const POPULATION_SEED: u64 = 0x5eed_0f_7a75;
/// Fraction of response variation explained by the true model.
const EXPLAINED: f64 = 0.25;
/// Fraction explained by the contamination model.
const CONTAMINATION_EXPLAINED: f64 = 0.91;
const NOISE_SD: f64 = 0.2;
const LATENT_CORRELATION: f64 = 0.1;
const AR_CORRELATION: f64 = 0.5;
const T_DF: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    One,
    Alternative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    /// Stability parameter of the symmetric stable error law.
    pub nu: f64,
    pub contaminated: bool,
    pub seed: u64,
    /// Multiplier applied to good-leverage cells.
    pub good_leverage_factor: f64,
    /// Bad-leverage size; defaults to 2 (scenario one) or 256 (alternative).
    pub bad_leverage: Option<f64>,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, n: usize, p: usize, nu: f64, contaminated: bool, seed: u64) -> Self {
        ScenarioConfig {
            scenario,
            n,
            p,
            nu,
            contaminated,
            seed,
            good_leverage_factor: 10.0,
            bad_leverage: None,
        }
    }

    /// Number of relevant predictors, `log2(p)`.
    pub fn s(&self) -> usize {
        self.p.trailing_zeros() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || !self.p.is_power_of_two() {
            return Err(invalid_param(format!("p must be a power of two (>= 2), got {}", self.p)));
        }
        if self.n < 10 {
            return Err(invalid_param(format!("n must be at least 10, got {}", self.n)));
        }
        check_nu(self.nu)?;
        if !(self.good_leverage_factor.is_finite() && self.good_leverage_factor > 0.0) {
            return Err(invalid_param("good-leverage factor must be positive"));
        }
        if let Some(k) = self.bad_leverage {
            if !(k.is_finite() && k > 0.0) {
                return Err(invalid_param("bad-leverage size must be positive"));
            }
        }
        Ok(())
    }

    fn bad_leverage(&self) -> f64 {
        self.bad_leverage.unwrap_or(match self.scenario {
            Scenario::One => 2.0,
            Scenario::Alternative => 256.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedData {
    pub dataset: Dataset,
    pub beta: Vec<f64>,
    pub contaminated: Vec<usize>,
    pub contaminated_predictors: Vec<usize>,
    pub good_leverage: Vec<usize>,
    /// Tau-scale of the error distribution.
    pub error_scale: f64,
    /// The error draws added to the clean responses.
    pub errors: Vec<f64>,
}

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu <= 2.0 {
        Ok(())
    } else {
        Err(invalid_param(format!("stability parameter must lie in (0, 2], got {nu}")))
    }
}

/// One symmetric stable draw (Chambers-Mallows-Stuck).
fn stable_draw<R: Rng>(nu: f64, rng: &mut R) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let v: f64 = rng.gen_range(-half_pi..half_pi);
    let w: f64 = rng.sample(Exp1);
    if nu == 1.0 {
        return v.tan();
    }
    (nu * v).sin() / v.cos().powf(1.0 / nu) * ((v - nu * v).cos() / w).powf((1.0 - nu) / nu)
}

/// `n` i.i.d. symmetric stable draws. `nu = 2` is Normal with variance 2,
/// `nu = 1` standard Cauchy.
pub fn sample_stable(nu: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_nu(nu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| stable_draw(nu, &mut rng)).collect())
}

fn cached(key: (u8, u64, usize), f: impl FnOnce() -> f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(u8, u64, usize), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("population cache").get(&key) {
        return *v;
    }
    let v = f();
    cache.lock().expect("population cache").insert(key, v);
    v
}

fn population_tau(draws: &[f64]) -> f64 {
    tau_scale(draws, &TauScaleConfig::default()).expect("non-empty sample")
}

/// Tau-scale of the standard symmetric stable law with parameter `nu`.
pub fn stable_tau(nu: f64) -> Result<f64> {
    check_nu(nu)?;
    Ok(cached((0, nu.to_bits(), 0), || {
        population_tau(&sample_stable(nu, POPULATION_DRAWS, POPULATION_SEED).expect("valid nu"))
    }))
}

fn t_divisor<R: Rng>(rng: &mut R) -> f64 {
    let chi: f64 = rng.sample(ChiSquared::new(T_DF).expect("df"));
    // Unit variance: t_4 has variance 2.
    (chi / T_DF).sqrt() * std::f64::consts::SQRT_2
}

/// Latent group of predictor `j` (zero-based) in scenario one.
fn latent_index(j: usize, s: usize, group: usize) -> usize {
    j / group + usize::from(j >= s)
}

fn group_size(p: usize) -> usize {
    (1.0 + (p as f64).sqrt() / 2.0).floor() as usize
}

/// Latent draws: unit-variance multivariate t_4 with equal correlation.
fn latent_row<R: Rng>(count: usize, rng: &mut R) -> Vec<f64> {
    let shared: f64 = rng.sample(StandardNormal);
    let div = t_divisor(rng);
    (0..count)
        .map(|_| {
            let own: f64 = rng.sample(StandardNormal);
            (LATENT_CORRELATION.sqrt() * shared + (1.0 - LATENT_CORRELATION).sqrt() * own) / div
        })
        .collect()
}

fn ar_row<R: Rng>(p: usize, rng: &mut R) -> Vec<f64> {
    let div = t_divisor(rng);
    let innov = (1.0 - AR_CORRELATION * AR_CORRELATION).sqrt();
    let mut prev: f64 = rng.sample(StandardNormal);
    let mut row = Vec::with_capacity(p);
    row.push(prev / div);
    for _ in 1..p {
        let z: f64 = rng.sample(StandardNormal);
        prev = AR_CORRELATION * prev + innov * z;
        row.push(prev / div);
    }
    row
}

fn scenario_one_row<R: Rng>(p: usize, s: usize, rng: &mut R) -> Vec<f64> {
    let group = group_size(p);
    let latents = latent_index(p - 1, s, group) + 1;
    let z = latent_row(latents, rng);
    (0..p)
        .map(|j| {
            let xi: f64 = rng.sample(StandardNormal);
            z[latent_index(j, s, group)] + NOISE_SD * xi
        })
        .collect()
}

/// Population covariance of the predictors.
fn covariance(scenario: Scenario, p: usize, s: usize) -> DMatrix<f64> {
    match scenario {
        Scenario::One => {
            let group = group_size(p);
            DMatrix::from_fn(p, p, |a, b| {
                let same = latent_index(a, s, group) == latent_index(b, s, group);
                let c = if same { 1.0 } else { LATENT_CORRELATION };
                c + if a == b { NOISE_SD * NOISE_SD } else { 0.0 }
            })
        }
        Scenario::Alternative => {
            DMatrix::from_fn(p, p, |a, b| AR_CORRELATION.powi((a as i32 - b as i32).abs()))
        }
    }
}

/// Scale of the signal `x' beta0`: its variance for Normal errors, its
/// tau-scale otherwise.
fn signal_scale(scenario: Scenario, p: usize, s: usize, nu: f64) -> f64 {
    if nu == 2.0 {
        let cov = covariance(scenario, p, s);
        let var: f64 = (0..s).flat_map(|a| (0..s).map(move |b| (a, b))).map(|(a, b)| cov[(a, b)]).sum();
        return var.sqrt();
    }
    let key = (1 + scenario as u8, p as u64, s);
    cached(key, || {
        let mut rng = ChaCha8Rng::seed_from_u64(POPULATION_SEED ^ key.0 as u64);
        let draws: Vec<f64> = (0..POPULATION_DRAWS)
            .map(|_| {
                let row = match scenario {
                    Scenario::One => scenario_one_row(p, s, &mut rng),
                    Scenario::Alternative => ar_row(s, &mut rng),
                };
                row[..s].iter().sum()
            })
            .collect();
        population_tau(&draws)
    })
}

/// Multiplier of the standard stable errors giving the target explained
/// fraction, and the tau-scale of the resulting error law.
fn error_multiplier(scenario: Scenario, p: usize, s: usize, nu: f64) -> Result<(f64, f64)> {
    let signal = signal_scale(scenario, p, s, nu);
    let ratio = ((1.0 - EXPLAINED) / EXPLAINED).sqrt();
    let sigma = if nu == 2.0 {
        ratio * signal / std::f64::consts::SQRT_2
    } else {
        ratio * signal / stable_tau(nu)?
    };
    Ok((sigma, sigma * stable_tau(nu)?))
}

/// Rows (among `eligible`) with the `count` largest Mahalanobis distances.
fn largest_mahalanobis(x: &DMatrix<f64>, cov: &DMatrix<f64>, eligible: &[usize], count: usize) -> Vec<usize> {
    let chol = cov.clone().cholesky().expect("covariance is positive definite");
    let mut dist: Vec<(f64, usize)> = eligible
        .iter()
        .map(|&i| {
            let row = DVector::from_iterator(x.ncols(), x.row(i).iter().copied());
            let z = chol.l().solve_lower_triangular(&row).expect("triangular solve");
            (z.norm_squared(), i)
        })
        .collect();
    dist.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<usize> = dist.into_iter().take(count).map(|(_, i)| i).collect();
    out.sort_unstable();
    out
}

/// Generates one sample of the configured scenario.
pub fn generate(cfg: &ScenarioConfig) -> Result<GeneratedData> {
    cfg.validate()?;
    let (n, p, s) = (cfg.n, cfg.p, cfg.s());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let row = match cfg.scenario {
            Scenario::One => scenario_one_row(p, s, &mut rng),
            Scenario::Alternative => ar_row(p, &mut rng),
        };
        for (j, v) in row.into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let (sigma, error_scale) = error_multiplier(cfg.scenario, p, s, cfg.nu)?;
    let errors: Vec<f64> = (0..n).map(|_| sigma * stable_draw(cfg.nu, &mut rng)).collect();
    let beta: Vec<f64> = (0..p).map(|j| if j < s { 1.0 } else { 0.0 }).collect();
    let mut y: Vec<f64> = (0..n)
        .map(|i| (0..s).map(|j| x[(i, j)]).sum::<f64>() + errors[i])
        .collect();

    let n_bad = if !cfg.contaminated {
        0
    } else {
        match cfg.scenario {
            Scenario::One => n / 10,
            Scenario::Alternative => n / 4,
        }
    };
    let contaminated: Vec<usize> = (0..n_bad).collect();

    // Good leverage: largest Mahalanobis distances among clean rows.
    let clean: Vec<usize> = (n_bad..n).collect();
    let cov = covariance(cfg.scenario, p, s);
    let good_leverage = largest_mahalanobis(&x, &cov, &clean, n / 5);
    let good_cols: Vec<usize> = match cfg.scenario {
        Scenario::One => (p - (p - s) / 2..p).collect(),
        Scenario::Alternative => (p - s.min(p - s)..p).collect(),
    };
    for &i in &good_leverage {
        for &j in &good_cols {
            x[(i, j)] *= cfg.good_leverage_factor;
        }
    }

    let mut contaminated_predictors = Vec::new();
    if n_bad > 0 {
        let mut cols: Vec<usize> = sample_indices(&mut rng, p - s, s.min(p - s))
            .into_iter()
            .map(|j| j + s)
            .collect();
        cols.sort_unstable();
        contaminated_predictors = cols.clone();
        let coef = match cfg.scenario {
            Scenario::One => -1.0,
            Scenario::Alternative => -3.0,
        };
        let mut lev_cols = cols.clone();
        if cfg.scenario == Scenario::Alternative {
            let mut rel: Vec<usize> = sample_indices(&mut rng, s, 2.min(s)).into_vec();
            rel.sort_unstable();
            lev_cols.extend(rel);
        }
        let k = cfg.bad_leverage();
        for &j in &lev_cols {
            let max_abs = clean.iter().map(|&i| x[(i, j)].abs()).fold(0.0, f64::max);
            for &i in &contaminated {
                let v = x[(i, j)];
                let sign = if v < 0.0 { -1.0 } else { 1.0 };
                x[(i, j)] = sign * k * max_abs;
            }
        }
        let eta: Vec<f64> = contaminated
            .iter()
            .map(|&i| coef * cols.iter().map(|&j| x[(i, j)]).sum::<f64>())
            .collect();
        let power = eta.iter().map(|v| v * v).sum::<f64>() / eta.len() as f64;
        let sd = (power * (1.0 - CONTAMINATION_EXPLAINED) / CONTAMINATION_EXPLAINED).sqrt();
        for (pos, &i) in contaminated.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            y[i] = eta[pos] + sd * z;
        }
    }

    Ok(GeneratedData {
        dataset: Dataset::new(x, y)?,
        beta,
        contaminated,
        contaminated_predictors,
        good_leverage,
        error_scale,
        errors,
    })
}

pub fn generate_scenario_one(cfg: &ScenarioConfig) -> Result<GeneratedData> {
    generate(&ScenarioConfig {
        scenario: Scenario::One,
        ..cfg.clone()
    })
}

pub fn generate_alternative_scenario(cfg: &ScenarioConfig) -> Result<GeneratedData> {
    generate(&ScenarioConfig {
        scenario: Scenario::Alternative,
        ..cfg.clone()
    })
}

pub const GOOD_LEVERAGE_N: usize = 100;
pub const GOOD_LEVERAGE_P: usize = 32;
pub const GOOD_LEVERAGE_RELEVANT: usize = 5;
/// Rows whose response and two relevant predictors are shifted.
pub const GOOD_LEVERAGE_BAD_ROWS: usize = 5;
/// Rows whose irrelevant predictors receive good leverage.
pub const GOOD_LEVERAGE_ROWS: usize = 10;
const GOOD_LEVERAGE_NOISE_SD: f64 = 1.5;
/// Leverage size used when none is given.
pub const GOOD_LEVERAGE_DEFAULT: f64 = 10.0;

/// Independent Normal predictors, five relevant, with a knob `leverage`
/// that shifts five irrelevant predictors in ten clean observations with
/// large positive responses, and shifts two relevant predictors and the
/// response of five other observations. `leverage = 0` gives the clean
/// base sample.
pub fn generate_good_leverage_example(seed: u64, leverage: f64) -> Result<GeneratedData> {
    if !leverage.is_finite() {
        return Err(invalid_param("leverage must be finite"));
    }
    let (n, p, s) = (GOOD_LEVERAGE_N, GOOD_LEVERAGE_P, GOOD_LEVERAGE_RELEVANT);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let errors: Vec<f64> = (0..n)
        .map(|_| GOOD_LEVERAGE_NOISE_SD * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let beta: Vec<f64> = (0..p).map(|j| if j < s { 1.0 } else { 0.0 }).collect();
    let mut y: Vec<f64> = (0..n)
        .map(|i| (0..s).map(|j| x[(i, j)]).sum::<f64>() + errors[i])
        .collect();

    let bad: Vec<usize> = (0..GOOD_LEVERAGE_BAD_ROWS).collect();
    let mut med = y.clone();
    let center = crate::scale::lower_median(&mut med);
    // Clean rows ranked by their response above the median; the most extreme
    // few are skipped so the leverage rows stay inliers of the true model.
    let mut ranked: Vec<usize> = (GOOD_LEVERAGE_BAD_ROWS..n).collect();
    ranked.sort_by(|&a, &b| (y[b] - center).total_cmp(&(y[a] - center)).then(a.cmp(&b)));
    let mut good: Vec<usize> = ranked.into_iter().skip(5).take(GOOD_LEVERAGE_ROWS).collect();
    good.sort_unstable();
    let cols: Vec<usize> = (p - 5..p).collect();

    for &i in &good {
        for &j in &cols {
            x[(i, j)] += leverage;
        }
    }
    for &i in &bad {
        x[(i, 0)] += leverage;
        x[(i, 1)] += leverage;
        y[i] -= 4.0 * leverage;
    }
    let error_scale = GOOD_LEVERAGE_NOISE_SD * stable_tau(2.0)? / std::f64::consts::SQRT_2;
    Ok(GeneratedData {
        dataset: Dataset::new(x, y)?,
        beta,
        contaminated: bad,
        contaminated_predictors: cols,
        good_leverage: good,
        error_scale,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn normal_stable_has_variance_two() {
        let v = sample_stable(2.0, 100_000, 1).unwrap();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
        assert!((var / 2.0 - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn cauchy_quantiles() {
        let mut v = sample_stable(1.0, 100_000, 2).unwrap();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[(p * v.len() as f64) as usize];
        assert!(q(0.5).abs() < 0.02);
        assert!(((q(0.75) - q(0.25)) / 2.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn stable_is_symmetric() {
        let v = sample_stable(1.3, 100_000, 3).unwrap();
        let t: Vec<f64> = v.iter().map(|x| x.abs().min(10.0) * x.signum()).collect();
        let m = t.iter().sum::<f64>() / t.len() as f64;
        let sd = (t.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / t.len() as f64).sqrt();
        assert!(m.abs() < 3.0 * sd / (t.len() as f64).sqrt());
        assert!(sample_stable(0.0, 10, 1).is_err());
        assert!(sample_stable(2.5, 10, 1).is_err());
    }

    #[test]
    fn scenario_one_group_correlation() {
        let g = generate(&ScenarioConfig::new(Scenario::One, 200, 32, 2.0, false, 4)).unwrap();
        let x = g.dataset.x();
        // Predictors 0..3 share a latent variable (group size 3).
        let c = pearson(x.column(0).as_slice(), x.column(1).as_slice());
        assert!((0.90..=0.99).contains(&c), "{c}");
    }

    #[test]
    fn scenario_one_explained_variation() {
        let g = generate(&ScenarioConfig::new(Scenario::One, 10_000, 32, 2.0, false, 5)).unwrap();
        let d = &g.dataset;
        let signal: Vec<f64> = (0..d.n()).map(|i| (0..5).map(|j| d.x()[(i, j)]).sum()).collect();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
        };
        // Good-leverage rows only touch irrelevant predictors.
        let r = var(&signal) / var(d.y());
        assert!((0.20..=0.30).contains(&r), "{r}");
    }

    #[test]
    fn contamination_bookkeeping() {
        let g = generate(&ScenarioConfig::new(Scenario::One, 200, 32, 1.0, true, 6)).unwrap();
        assert_eq!(g.contaminated.len(), 20);
        assert_eq!(g.contaminated_predictors.len(), 5);
        assert!(g.contaminated_predictors.iter().all(|&j| j >= 5));
        assert_eq!(g.good_leverage.len(), 40);
        assert!(g.good_leverage.iter().all(|i| !g.contaminated.contains(i)));
        assert!(generate(&ScenarioConfig::new(Scenario::One, 200, 30, 1.0, true, 6)).is_err());
    }

    #[test]
    fn alternative_scenario_structure() {
        let g = generate(&ScenarioConfig::new(Scenario::Alternative, 10_000, 32, 2.0, false, 7)).unwrap();
        let x = g.dataset.x();
        let c = pearson(x.column(10).as_slice(), x.column(11).as_slice());
        assert!((0.42..=0.58).contains(&c), "{c}");
        let g = generate(&ScenarioConfig::new(Scenario::Alternative, 100, 32, 2.0, true, 8)).unwrap();
        assert_eq!(g.contaminated.len(), 25);
        // The contaminated response follows -3 * sum over the contaminated predictors.
        let d = &g.dataset;
        let eta: Vec<f64> = g
            .contaminated
            .iter()
            .map(|&i| -3.0 * g.contaminated_predictors.iter().map(|&j| d.x()[(i, j)]).sum::<f64>())
            .collect();
        let fit: f64 = g.contaminated.iter().zip(&eta).map(|(&i, e)| d.y()[i] * e).sum::<f64>()
            / eta.iter().map(|e| e * e).sum::<f64>();
        let resid: f64 = g.contaminated.iter().zip(&eta).map(|(&i, e)| (d.y()[i] - e).powi(2)).sum::<f64>();
        let power: f64 = eta.iter().map(|e| e * e).sum::<f64>();
        // Noise carries 9% of the contaminated response's power.
        assert!((0.03..0.2).contains(&(resid / power)));
        assert!((fit - 1.0).abs() < 0.25, "{fit}");
    }

    #[test]
    fn error_scale_matches_sample() {
        for nu in [1.0, 2.0] {
            let g = generate(&ScenarioConfig::new(Scenario::One, 50, 16, nu, false, 9)).unwrap();
            let (sigma, scale) = error_multiplier(Scenario::One, 16, 4, nu).unwrap();
            let draws: Vec<f64> = sample_stable(nu, POPULATION_DRAWS, 77)
                .unwrap()
                .into_iter()
                .map(|e| sigma * e)
                .collect();
            let tau = population_tau(&draws);
            assert!((tau / scale - 1.0).abs() < 0.01);
            assert_eq!(g.error_scale, scale);
        }
    }

    #[test]
    fn generators_are_reproducible() {
        let cfg = ScenarioConfig::new(Scenario::One, 60, 16, 1.5, true, 10);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    }

    #[test]
    fn good_leverage_example_structure() {
        let base = generate_good_leverage_example(11, 0.0).unwrap();
        let g = generate_good_leverage_example(11, 3.0).unwrap();
        let g2 = generate_good_leverage_example(11, 6.0).unwrap();
        assert_eq!(g.beta.iter().filter(|b| **b != 0.0).count(), 5);
        assert_eq!(g.contaminated.len(), 5);
        assert_eq!(g.good_leverage.len(), 10);
        assert_eq!(g.contaminated_predictors.len(), 5);
        let (bx, gx, g2x) = (base.dataset.x(), g.dataset.x(), g2.dataset.x());
        let mut changed = 0;
        for i in 0..100 {
            for j in 0..32 {
                let d1 = gx[(i, j)] - bx[(i, j)];
                let d2 = g2x[(i, j)] - bx[(i, j)];
                assert!((d2 - 2.0 * d1).abs() < 1e-12);
                if d1 != 0.0 {
                    changed += 1;
                }
            }
        }
        assert_eq!(changed, 10 * 5 + 5 * 2);
        let plain = generate_good_leverage_example(11, 0.0).unwrap();
        assert_eq!(plain.dataset, base.dataset);
    }
}
