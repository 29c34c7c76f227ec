use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io, PathMethod, ScenarioArg, VERSION};
use crate::cv::{fit_with_cv, in_pool, standardize, CvConfig, CvSurface, SelectedHyper, StandardizationRecord};
use crate::data::Dataset;
use crate::datagen::{generate, generate_good_leverage_example, Scenario, ScenarioConfig, GOOD_LEVERAGE_DEFAULT, GOOD_LEVERAGE_N, GOOD_LEVERAGE_P};
use crate::en_solver::{lambda_max, log_grid, ls_en_path, EnSolverConfig};
use crate::error::{invalid_data, invalid_param, Result};
use crate::metrics::{mcc, prediction_tau_ratio, relative_prediction_performance, sensitivity_specificity, ConfusionCounts};
use crate::pense::{active_set, path_lambda_grid, regularization_path, PathConfig, PenaltyFamily};
use crate::rho::consistency_cutoff;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub version: String,
    pub config: CvConfig,
    pub n: usize,
    pub p: usize,
    pub intercept: f64,
    /// Coefficients on the original predictor scale.
    pub beta: Vec<f64>,
    pub active: Vec<usize>,
    /// Residual M-scale, consistent for the standard deviation under Normal errors.
    pub scale: f64,
    pub objective: f64,
    pub converged: bool,
    pub selected: SelectedHyper,
    pub seed: u64,
    /// Preliminary ridge coefficients on the standardized scale.
    pub preliminary: Option<Vec<f64>>,
    pub standardization: StandardizationRecord,
    pub surface: CvSurface,
    pub ridge_surface: Option<CvSurface>,
}

pub fn fit_report(data: &Dataset, cfg: &CvConfig) -> Result<FitReport> {
    if data.p() == 0 {
        return Err(invalid_data("no predictors"));
    }
    let cv = fit_with_cv(data, cfg)?;
    let c = consistency_cutoff(cfg.path.sloss.delta)?;
    Ok(FitReport {
        version: VERSION.to_string(),
        config: cfg.clone(),
        n: data.n(),
        p: data.p(),
        intercept: cv.fit.intercept,
        active: cv.fit.active.clone(),
        beta: cv.fit.beta,
        scale: cv.fit.scale / c,
        objective: cv.fit.objective,
        converged: cv.fit.converged,
        selected: cv.selected,
        seed: cfg.seed,
        preliminary: cv.preliminary.map(|f| f.beta),
        standardization: cv.record,
        surface: cv.surface,
        ridge_surface: cv.ridge_surface,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub active: Vec<usize>,
    /// Consistency-corrected residual M-scale (robust method only).
    pub scale: Option<f64>,
    pub objective: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub version: String,
    pub method: PathMethod,
    pub alpha: f64,
    pub delta: f64,
    /// Penalty levels on the standardized scale.
    pub lambdas: Vec<f64>,
    pub standardization: StandardizationRecord,
    pub points: Vec<PathPoint>,
}

pub fn path_report(
    data: &Dataset,
    method: PathMethod,
    alpha: f64,
    delta: f64,
    n_lambda: usize,
    lambda_ratio: f64,
    threads: Option<usize>,
) -> Result<PathReport> {
    if data.p() == 0 {
        return Err(invalid_data("no predictors"));
    }
    if threads == Some(0) {
        return Err(invalid_param("threads must be positive"));
    }
    let cfg = PathConfig::with_delta(delta)?;
    let (std, record) = standardize(data)?;
    let family = PenaltyFamily::unit(alpha, data.p())?;
    let points = match method {
        PathMethod::Pense => {
            let lambdas = path_lambda_grid(&std, &family, n_lambda, lambda_ratio, &cfg.sloss)?;
            let fits = in_pool(threads, || regularization_path(&std, &lambdas, &family, &cfg))??;
            let c = consistency_cutoff(delta)?;
            lambdas
                .iter()
                .zip(fits)
                .map(|(&lambda, f)| match f {
                    Ok(f) => {
                        let (intercept, beta) = record.to_original(f.intercept, &f.beta);
                        PathPoint {
                            lambda,
                            intercept,
                            beta,
                            active: f.active,
                            scale: Some(f.scale / c),
                            objective: Some(f.objective),
                            error: None,
                        }
                    }
                    Err(e) => PathPoint {
                        lambda,
                        intercept: f64::NAN,
                        beta: Vec::new(),
                        active: Vec::new(),
                        scale: None,
                        objective: None,
                        error: Some(e.to_string()),
                    },
                })
                .collect::<Vec<_>>()
        }
        PathMethod::LsEn => {
            if !(n_lambda > 0 && lambda_ratio > 0.0 && lambda_ratio < 1.0) {
                return Err(invalid_param("grid needs n_lambda > 0 and ratio in (0, 1)"));
            }
            let max = lambda_max(&std, None, alpha.max(0.1), &family.loadings)?;
            let lambdas = log_grid(max * (1.0 + 1e-4), lambda_ratio, n_lambda);
            let sols = ls_en_path(&std, alpha, &family.loadings, &lambdas, &EnSolverConfig::default())?;
            lambdas
                .iter()
                .zip(sols)
                .map(|(&lambda, s)| {
                    let (intercept, beta) = record.to_original(s.intercept, &s.beta);
                    PathPoint {
                        lambda,
                        intercept,
                        active: active_set(&beta),
                        beta,
                        scale: None,
                        objective: None,
                        error: None,
                    }
                })
                .collect()
        }
    };
    Ok(PathReport {
        version: VERSION.to_string(),
        method,
        alpha,
        delta,
        lambdas: points.iter().map(|p| p.lambda).collect(),
        standardization: record,
        points,
    })
}

/// Scenario selection for `simulate`; `leverage` is the good-leverage size
/// of the good-leverage example or the good-leverage factor of the scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub scenario: ScenarioArg,
    pub n: usize,
    pub p: usize,
    pub nu: f64,
    pub contaminated: bool,
    pub seed: u64,
    #[serde(default)]
    pub leverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub version: String,
    pub spec: SimulationSpec,
    pub beta: Vec<f64>,
    pub contaminated: Vec<usize>,
    pub contaminated_predictors: Vec<usize>,
    pub good_leverage: Vec<usize>,
    /// Tau-scale of the error distribution.
    pub error_scale: f64,
}

pub fn simulate(spec: &SimulationSpec) -> Result<(Dataset, TruthSidecar)> {
    let mut resolved = spec.clone();
    let generated = match spec.scenario {
        ScenarioArg::GoodLeverage => {
            let k = spec.leverage.unwrap_or(GOOD_LEVERAGE_DEFAULT);
            resolved.n = GOOD_LEVERAGE_N;
            resolved.p = GOOD_LEVERAGE_P;
            resolved.nu = 2.0;
            resolved.contaminated = true;
            resolved.leverage = Some(k);
            generate_good_leverage_example(spec.seed, k)?
        }
        ScenarioArg::One | ScenarioArg::Alternative => {
            let scenario = if spec.scenario == ScenarioArg::One {
                Scenario::One
            } else {
                Scenario::Alternative
            };
            let mut cfg = ScenarioConfig::new(scenario, spec.n, spec.p, spec.nu, spec.contaminated, spec.seed);
            if let Some(k) = spec.leverage {
                cfg.good_leverage_factor = k;
            }
            resolved.leverage = Some(cfg.good_leverage_factor);
            generate(&cfg)?
        }
    };
    let truth = TruthSidecar {
        version: VERSION.to_string(),
        spec: resolved,
        beta: generated.beta,
        contaminated: generated.contaminated,
        contaminated_predictors: generated.contaminated_predictors,
        good_leverage: generated.good_leverage,
        error_scale: generated.error_scale,
    };
    Ok((generated.dataset, truth))
}

/// The part of a report needed for prediction.
#[derive(Debug, Clone, Deserialize)]
struct LinearModel {
    intercept: f64,
    beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: String,
    pub confusion: ConfusionCounts,
    pub mcc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Tau-scale of the test prediction errors over the true error scale.
    pub tau_ratio: f64,
    pub reference_tau_ratio: Option<f64>,
    /// Relative prediction performance against the reference report.
    pub rpp: Option<f64>,
}

pub fn evaluate(
    report: &Path,
    truth: &Path,
    test: &Path,
    reference: Option<&Path>,
    c_tau: f64,
) -> Result<EvaluationReport> {
    let model: LinearModel = io::read_json(report)?;
    let truth: TruthSidecar = io::read_json(truth)?;
    let test = io::read_dataset(test)?;
    let reference: Option<LinearModel> = reference.map(io::read_json).transpose()?;
    let p = truth.beta.len();
    for (what, len) in [("report", model.beta.len()), ("test data", test.p())]
        .into_iter()
        .chain(reference.as_ref().map(|r| ("reference report", r.beta.len())))
    {
        if len != p {
            return Err(invalid_data(format!("{what} has {len} predictors, truth has {p}")));
        }
    }
    let confusion = ConfusionCounts::from_coefficients(&model.beta, &truth.beta)?;
    let (sensitivity, specificity) = sensitivity_specificity(confusion);
    let ratio = |m: &LinearModel| {
        prediction_tau_ratio(&test.predict(m.intercept, &m.beta), test.y(), truth.error_scale, c_tau)
    };
    let tau_ratio = ratio(&model)?;
    let reference_tau_ratio = reference.as_ref().map(ratio).transpose()?;
    let rpp = reference_tau_ratio
        .map(|r| relative_prediction_performance(tau_ratio, r))
        .transpose()?;
    Ok(EvaluationReport {
        version: VERSION.to_string(),
        confusion,
        mcc: mcc(confusion),
        sensitivity,
        specificity,
        tau_ratio,
        reference_tau_ratio,
        rpp,
    })
}
