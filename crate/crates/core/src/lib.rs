//! Robust, sparse linear regression with adaptive penalized elastic-net
//! S-estimators.
//!
//! The estimator minimizes the squared M-scale of the residuals plus an
//! adaptive elastic-net penalty whose per-coefficient loadings come from a
//! preliminary ridge-type fit. Hyper-parameters are chosen by repeated K-fold
//! cross-validation with a robust (tau-scale) prediction criterion.

pub mod cli;
pub mod cv;
pub mod data;
pub mod datagen;
pub mod en_solver;
pub mod error;
pub mod metrics;
pub mod pense;
pub mod rho;
pub mod scale;

pub use data::Dataset;
pub use error::{PenseError, Result};
