//! Variable-selection and prediction metrics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Result};
use crate::scale::{tau_scale, TauScaleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    /// Counts from estimated and true coefficients (non-zero means selected).
    pub fn from_coefficients(estimate: &[f64], truth: &[f64]) -> Result<Self> {
        if estimate.len() != truth.len() {
            return Err(invalid_param("coefficient vectors differ in length"));
        }
        let mut c = ConfusionCounts {
            tp: 0,
            tn: 0,
            fp: 0,
            fn_: 0,
        };
        for (e, t) in estimate.iter().zip(truth) {
            match (*e != 0.0, *t != 0.0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Matthews correlation coefficient; 0 when any margin is empty.
pub fn mcc(c: ConfusionCounts) -> f64 {
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / denom.sqrt()
    }
}

/// `(TP / (TP + FN), TN / (TN + FP))`, each 1 when its class is empty.
pub fn sensitivity_specificity(c: ConfusionCounts) -> (f64, f64) {
    let ratio = |a: usize, b: usize| if a + b == 0 { 1.0 } else { a as f64 / (a + b) as f64 };
    (ratio(c.tp, c.fn_), ratio(c.tn, c.fp))
}

/// Relative prediction performance of a method against a reference:
/// `tau_m / tau_ref - 1` if the method is worse, `1 - tau_ref / tau_m` otherwise.
pub fn relative_prediction_performance(tau_m: f64, tau_ref: f64) -> Result<f64> {
    if !(tau_m > 0.0 && tau_ref > 0.0) {
        return Err(invalid_param(format!(
            "scales must be positive, got {tau_m} and {tau_ref}"
        )));
    }
    Ok(if tau_m >= tau_ref {
        tau_m / tau_ref - 1.0
    } else {
        1.0 - tau_ref / tau_m
    })
}

/// Tau-scale of `truth - predictions` relative to the true error scale.
pub fn prediction_tau_ratio(predictions: &[f64], truth: &[f64], true_scale: f64, c_tau: f64) -> Result<f64> {
    if !(true_scale > 0.0) {
        return Err(invalid_param("true error scale must be positive"));
    }
    if predictions.len() != truth.len() {
        return Err(invalid_param("predictions and responses differ in length"));
    }
    let e: Vec<f64> = truth.iter().zip(predictions).map(|(t, p)| t - p).collect();
    Ok(tau_scale(&e, &TauScaleConfig { c_tau })? / true_scale)
}
