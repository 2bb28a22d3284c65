//! Single-mediator mediation analysis for incomplete data.
//!
//! Missing values are handled by multivariate-normal multiple imputation
//! (EM starting values followed by a data-augmentation chain). Standard errors
//! and bias-corrected confidence intervals come from a nonparametric bootstrap
//! in which every resample is imputed `K` times and the `K` complete-data fits
//! are averaged.
//!
//! The [`simlab`] module generates data from the mediation model, imposes
//! MCAR/MAR/MNAR missingness, and evaluates bias, coverage and power over
//! repeated replications.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod imputer;
mod linalg;
pub mod rng;
pub mod simlab;

pub use bootstrap::{analyze, bc_interval, bootstrap_resample, bootstrap_se, AnalysisOptions, BootstrapReport};
pub use dataset::{load_dataset, missing_patterns, Column, Dataset, MissingCode, MissingPattern, Role, RoleSpec};
pub use error::{Error, Result};
pub use estimator::{fit_complete, pool_point_estimates, sobel_se, Param, SampleMoments, ThetaVector};
pub use imputer::{em_mvn, impute, EmFit, ImputationConfig, MvnParams};
pub use rng::SeedTree;
