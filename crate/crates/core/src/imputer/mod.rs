//! Multivariate-normal multiple imputation.
//!
//! [`em_mvn`] finds the maximum-likelihood mean and covariance of the
//! role-bound variables (X, M, Y and every auxiliary) from incomplete data.
//! [`impute`] starts a data-augmentation chain at that estimate and emits `K`
//! completed datasets: each iteration draws the missing cells from their
//! conditional normal (I-step), then draws new parameters from the
//! completed-data posterior under the Jeffreys prior (P-step).

mod augment;
mod em;
mod work;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::SeedTree;

pub use em::EmFit;

pub(crate) use augment::multiply_impute;
pub(crate) use em::em_work;
pub(crate) use work::Incomplete;

/// Mean vector and covariance matrix of the joint normal model, over the
/// role-bound variables in role order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvnParams {
    pub mu: Vec<f64>,
    /// Row-major `d × d`.
    pub sigma: Vec<f64>,
}

impl MvnParams {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.sigma[i * self.dim() + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputationConfig {
    /// Number of imputations `K`.
    pub n_imputations: usize,
    pub em_max_iter: usize,
    pub em_tol: f64,
    pub burn_in: usize,
    /// Chain iterations between successive emitted imputations.
    pub thin: usize,
    /// Relative diagonal ridge used when a factorization fails.
    pub ridge_rel: f64,
}

impl Default for ImputationConfig {
    fn default() -> Self {
        Self { n_imputations: 100, em_max_iter: 500, em_tol: 1e-8, burn_in: 200, thin: 100, ridge_rel: 1e-8 }
    }
}

impl ImputationConfig {
    pub fn with_imputations(n_imputations: usize) -> Self {
        Self { n_imputations, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_imputations < 1 {
            return Err(Error::InvalidConfig("number of imputations must be at least 1".into()));
        }
        if self.thin < 1 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if !(self.em_tol > 0.0) {
            return Err(Error::InvalidConfig("EM tolerance must be positive".into()));
        }
        if !(self.ridge_rel >= 0.0) {
            return Err(Error::InvalidConfig("ridge must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Maximum-likelihood estimate of the joint normal model from incomplete data
/// (covariance with denominator n).
pub fn em_mvn(ds: &Dataset, max_iter: usize, tol: f64) -> Result<EmFit> {
    let work = Incomplete::from_dataset(ds)?;
    em_work(&work, max_iter, tol, ImputationConfig::default().ridge_rel)
}

/// `K` completed copies of `ds`. Observed cells are copied bit for bit; the
/// returned datasets have empty masks on the role-bound columns.
pub fn impute(ds: &Dataset, cfg: &ImputationConfig, seed: u64) -> Result<Vec<Dataset>> {
    cfg.validate()?;
    let work = Incomplete::from_dataset(ds)?;
    let mut rng = SeedTree::new(seed).stream(0);
    let mut out = Vec::with_capacity(cfg.n_imputations);
    multiply_impute(&work, cfg, &mut rng, |filled| {
        let columns = (0..work.dim()).map(|j| (0..work.n()).map(|i| filled[i * work.dim() + j]).collect()).collect();
        out.push(ds.with_bound_values(columns, None));
    })?;
    Ok(out)
}
