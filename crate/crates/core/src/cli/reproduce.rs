//! Simulation-study driver writing long-format per-seed metrics.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use super::{ContaminationArg, ReproduceArgs, VERSION};
use crate::cv::{fit_with_cv, CvConfig};
use crate::datagen::{generate, generate_good_leverage_example, GeneratedData, Scenario, ScenarioConfig, GOOD_LEVERAGE_P};
use crate::error::{invalid_param, Result};
use crate::metrics::{mcc, prediction_tau_ratio, relative_prediction_performance, sensitivity_specificity, ConfusionCounts};

pub const CSV_HEADER: &str = "method,p,nu,contamination,seed,metric,value";

/// Test samples use the training seed plus this offset.
const TEST_SEED_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Figure {
    #[value(name = "good-leverage")]
    #[serde(rename = "good-leverage")]
    GoodLeverage,
    #[value(name = "scenario1-prediction")]
    #[serde(rename = "scenario1-prediction")]
    Scenario1Prediction,
    #[value(name = "scenario1-mcc")]
    #[serde(rename = "scenario1-mcc")]
    Scenario1Mcc,
    #[value(name = "scenario2-prediction")]
    #[serde(rename = "scenario2-prediction")]
    Scenario2Prediction,
    #[value(name = "scenario2-mcc")]
    #[serde(rename = "scenario2-mcc")]
    Scenario2Mcc,
}

impl Figure {
    fn scenario(self) -> Option<Scenario> {
        match self {
            Figure::GoodLeverage => None,
            Figure::Scenario1Prediction | Figure::Scenario1Mcc => Some(Scenario::One),
            Figure::Scenario2Prediction | Figure::Scenario2Mcc => Some(Scenario::Alternative),
        }
    }

    fn prediction(self) -> bool {
        matches!(self, Figure::Scenario1Prediction | Figure::Scenario2Prediction)
    }
}

/// Fully resolved study configuration, written next to the CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceSpec {
    pub version: String,
    pub figure: Figure,
    pub seeds: Vec<u64>,
    pub p: Vec<usize>,
    pub nu: Vec<f64>,
    pub contamination: Vec<bool>,
    pub n: usize,
    pub n_test: usize,
    pub leverage: Vec<f64>,
    /// Tau-scale constant for test prediction errors.
    pub c_tau: f64,
    /// CV configuration; the seed is replaced by the data seed of each run.
    pub cv: CvConfig,
}

impl ReproduceSpec {
    pub fn from_args(a: &ReproduceArgs) -> Result<Self> {
        if a.seeds == 0 {
            return Err(invalid_param("need at least one seed"));
        }
        let n = a.n.unwrap_or(match a.figure.scenario() {
            Some(Scenario::Alternative) => 100,
            _ => 200,
        });
        let spec = ReproduceSpec {
            version: VERSION.to_string(),
            figure: a.figure,
            seeds: (a.first_seed..a.first_seed + a.seeds).collect(),
            p: a.p.clone(),
            nu: a.nu.clone(),
            contamination: match a.contamination {
                ContaminationArg::Clean => vec![false],
                ContaminationArg::Contaminated => vec![true],
                ContaminationArg::Both => vec![false, true],
            },
            n,
            n_test: a.n_test,
            leverage: a.leverage.clone(),
            c_tau: a.cv.c_tau,
            cv: a.cv.to_config()?,
        };
        if spec.figure.scenario().is_some() {
            for &p in &spec.p {
                ScenarioConfig::new(Scenario::One, spec.n, p, 2.0, false, 0).validate()?;
            }
            for &nu in &spec.nu {
                ScenarioConfig::new(Scenario::One, spec.n, 2, nu, false, 0).validate()?;
            }
            if spec.n_test < 10 {
                return Err(invalid_param("n_test must be at least 10"));
            }
        } else if spec.leverage.iter().any(|k| !k.is_finite()) {
            return Err(invalid_param("leverage sizes must be finite"));
        }
        Ok(spec)
    }
}

struct Row<'a> {
    method: &'a str,
    p: usize,
    nu: f64,
    contamination: &'a str,
    seed: u64,
}

impl Row<'_> {
    fn write(&self, w: &mut impl Write, metric: &str, value: f64) -> std::io::Result<()> {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            self.method, self.p, self.nu, self.contamination, self.seed, metric, value
        )
    }
}

const METHODS: [(&str, bool); 2] = [("adapense", true), ("pense", false)];

fn fits(data: &GeneratedData, spec: &ReproduceSpec, seed: u64, threads: Option<usize>) -> Result<Vec<(f64, Vec<f64>)>> {
    METHODS
        .iter()
        .map(|&(_, adaptive)| {
            let cfg = CvConfig {
                seed,
                adaptive,
                threads,
                ..spec.cv.clone()
            };
            let f = fit_with_cv(&data.dataset, &cfg)?;
            Ok((f.fit.intercept, f.fit.beta))
        })
        .collect()
}

/// Runs the study and writes one CSV row per (method, cell, seed, metric).
/// Rows are flushed after every seed so a failure keeps finished results.
pub fn reproduce(spec: &ReproduceSpec, threads: Option<usize>, out: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "{CSV_HEADER}")?;
    w.flush()?;
    match spec.figure.scenario() {
        None => {
            for &k in &spec.leverage {
                let label = format!("leverage={k}");
                for &seed in &spec.seeds {
                    let data = generate_good_leverage_example(seed, k)?;
                    for ((method, _), (_, beta)) in METHODS.iter().zip(fits(&data, spec, seed, threads)?) {
                        let row = Row {
                            method,
                            p: GOOD_LEVERAGE_P,
                            nu: 2.0,
                            contamination: &label,
                            seed,
                        };
                        let c = ConfusionCounts::from_coefficients(&beta, &data.beta)?;
                        let (sens, _) = sensitivity_specificity(c);
                        let group = &data.contaminated_predictors;
                        let spec_group = group.iter().filter(|&&j| beta[j] == 0.0).count() as f64 / group.len() as f64;
                        row.write(&mut w, "sensitivity", sens)?;
                        row.write(&mut w, "specificity_contaminated", spec_group)?;
                        row.write(&mut w, "mcc", mcc(c))?;
                    }
                    w.flush()?;
                }
            }
        }
        Some(scenario) => {
            for &p in &spec.p {
                for &nu in &spec.nu {
                    for &contaminated in &spec.contamination {
                        let label = if contaminated { "contaminated" } else { "clean" };
                        for &seed in &spec.seeds {
                            let data = generate(&ScenarioConfig::new(scenario, spec.n, p, nu, contaminated, seed))?;
                            let results = fits(&data, spec, seed, threads)?;
                            if spec.figure.prediction() {
                                let test = generate(&ScenarioConfig::new(
                                    scenario,
                                    spec.n_test,
                                    p,
                                    nu,
                                    false,
                                    seed.wrapping_add(TEST_SEED_OFFSET),
                                ))?;
                                let ratios: Vec<f64> = results
                                    .iter()
                                    .map(|(b0, beta)| {
                                        prediction_tau_ratio(
                                            &test.dataset.predict(*b0, beta),
                                            test.dataset.y(),
                                            test.error_scale,
                                            spec.c_tau,
                                        )
                                    })
                                    .collect::<Result<_>>()?;
                                for (k, (method, _)) in METHODS.iter().enumerate() {
                                    let row = Row {
                                        method,
                                        p,
                                        nu,
                                        contamination: label,
                                        seed,
                                    };
                                    row.write(&mut w, "tau_ratio", ratios[k])?;
                                    let (other, other_ratio) = (METHODS[1 - k].0, ratios[1 - k]);
                                    let rpp = relative_prediction_performance(ratios[k], other_ratio)?;
                                    row.write(&mut w, &format!("rpp_vs_{other}"), rpp)?;
                                }
                            } else {
                                for ((method, _), (_, beta)) in METHODS.iter().zip(&results) {
                                    let row = Row {
                                        method,
                                        p,
                                        nu,
                                        contamination: label,
                                        seed,
                                    };
                                    let c = ConfusionCounts::from_coefficients(beta, &data.beta)?;
                                    let (sens, spec_) = sensitivity_specificity(c);
                                    row.write(&mut w, "mcc", mcc(c))?;
                                    row.write(&mut w, "sensitivity", sens)?;
                                    row.write(&mut w, "specificity", spec_)?;
                                }
                            }
                            w.flush()?;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
