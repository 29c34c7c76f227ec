//! Regression data: a response vector and a column-major predictor matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_data, Result};

/// A sample of `n` observations on `p` predictors.
///
/// Predictors are stored column-major so the coordinate-descent solver can
/// walk a single predictor as one contiguous slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(invalid_data(format!(
                "response has {} entries but predictor matrix has {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if y.is_empty() {
            return Err(invalid_data("dataset has no observations"));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(invalid_data("dataset contains non-finite values"));
        }
        Ok(Dataset { x, y })
    }

    /// Builds a dataset from row-major predictor values.
    pub fn from_rows(y: Vec<f64>, rows: &[f64], p: usize) -> Result<Self> {
        let n = y.len();
        if rows.len() != n * p {
            return Err(invalid_data(format!(
                "expected {} predictor values for n={n}, p={p}, got {}",
                n * p,
                rows.len()
            )));
        }
        Dataset::new(DMatrix::from_row_slice(n, p, rows), y)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }

    /// Linear predictor `intercept + X beta`.
    pub fn predict(&self, intercept: f64, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![intercept; self.n()];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (o, &x) in out.iter_mut().zip(self.column(j)) {
                    *o += b * x;
                }
            }
        }
        out
    }

    pub fn residuals(&self, intercept: f64, beta: &[f64]) -> Vec<f64> {
        let mut r = self.predict(intercept, beta);
        for (ri, &yi) in r.iter_mut().zip(&self.y) {
            *ri = yi - *ri;
        }
        r
    }

    /// Sub-sample with the given observation indices (in the given order).
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let p = self.p();
        let x = DMatrix::from_fn(rows.len(), p, |i, j| self.x[(rows[i], j)]);
        let y = rows.iter().map(|&i| self.y[i]).collect();
        Dataset { x, y }
    }

    pub(crate) fn into_parts(self) -> (DMatrix<f64>, Vec<f64>) {
        (self.x, self.y)
    }
}
