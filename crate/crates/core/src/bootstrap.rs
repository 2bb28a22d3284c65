//! Multiple imputation nested inside the nonparametric bootstrap.
//!
//! Each of the `B` replicates resamples rows with replacement (missing cells
//! travel with their rows), imputes the resample `K` times, fits every
//! completed dataset and pools the fits. Standard errors and bias-corrected
//! percentile intervals are then read off the `B` pooled replicates.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{fit_columns, Param, Pool, ThetaVector};
use crate::imputer::{multiply_impute, ImputationConfig, Incomplete};
use crate::rng::SeedTree;

/// Fresh substreams tried for a failing replicate before it is dropped.
pub const MAX_RETRIES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    /// Number of bootstrap replicates `B`.
    pub n_boot: usize,
    pub imputation: ImputationConfig,
    /// Confidence level of the BC intervals.
    pub level: f64,
    pub seed: u64,
}

impl AnalysisOptions {
    pub fn new(n_boot: usize, n_imputations: usize, level: f64, seed: u64) -> Self {
        Self { n_boot, imputation: ImputationConfig::with_imputations(n_imputations), level, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    /// Pooled MI estimate on the original data.
    pub point: ThetaVector,
    /// One row per successful replicate, columns in [`Param::ALL`] order.
    pub replicate_estimates: Vec<[f64; 8]>,
    pub se: [f64; 8],
    pub intervals: [(f64, f64); 8],
    pub level: f64,
    pub b_requested: usize,
    pub b_effective: usize,
    /// Replicate attempts that failed and were redrawn.
    pub retries: usize,
}

impl BootstrapReport {
    pub fn dropped(&self) -> usize {
        self.b_requested - self.b_effective
    }

    pub fn se_of(&self, p: Param) -> f64 {
        self.se[p.index()]
    }

    pub fn interval_of(&self, p: Param) -> (f64, f64) {
        self.intervals[p.index()]
    }
}

pub(crate) fn resample_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Draws `n_rows` rows uniformly with replacement.
pub fn bootstrap_resample(ds: &Dataset, seed: u64) -> Dataset {
    let mut rng = SeedTree::new(seed).stream(0);
    ds.select_rows(&resample_indices(ds.n_rows(), &mut rng))
}

/// Sample standard deviation (denominator B − 1).
pub fn bootstrap_se(estimates: &[f64]) -> Result<f64> {
    let b = estimates.len();
    if b < 2 {
        return Err(Error::TooFewReplicates(b));
    }
    let mean = estimates.iter().sum::<f64>() / b as f64;
    let ss: f64 = estimates.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((ss / (b as f64 - 1.0)).sqrt())
}

/// Bias-corrected percentile interval.
///
/// `z0` is the normal quantile of the share of replicates strictly below
/// `point`, clamped to `[1/(2B), 1 − 1/(2B)]`. The endpoints are the order
/// statistics at `int(α̃·(B+1))` (1-based, clamped to `1..=B`) with
/// `α̃ = Φ(2·z0 ± z)`.
pub fn bc_interval(estimates: &[f64], point: f64, level: f64) -> Result<(f64, f64)> {
    let b = estimates.len();
    if b < 2 {
        return Err(Error::TooFewReplicates(b));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let normal = Normal::standard();
    let bf = b as f64;
    let alpha = (1.0 - level) / 2.0;

    let below = estimates.iter().filter(|&&e| e < point).count() as f64;
    let p = (below / bf).clamp(1.0 / (2.0 * bf), 1.0 - 1.0 / (2.0 * bf));
    let z0 = normal.inverse_cdf(p);
    let alpha_lo = normal.cdf(2.0 * z0 + normal.inverse_cdf(alpha));
    let alpha_hi = normal.cdf(2.0 * z0 + normal.inverse_cdf(1.0 - alpha));

    let mut sorted = estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let order_stat = |a: f64| {
        let idx = ((a * (bf + 1.0)) as usize).clamp(1, b);
        sorted[idx - 1]
    };
    Ok((order_stat(alpha_lo), order_stat(alpha_hi)))
}

/// Pooled MI point estimate of the mediation model on one work matrix.
pub(crate) fn mi_point<R: Rng + ?Sized>(work: &Incomplete, cfg: &ImputationConfig, rng: &mut R) -> Result<ThetaVector> {
    let (n, d) = (work.n(), work.dim());
    let (mut x, mut m, mut y) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut pool = Pool::default();
    let mut failure = None;
    multiply_impute(work, cfg, rng, |filled| {
        if failure.is_some() {
            return;
        }
        for i in 0..n {
            x[i] = filled[i * d];
            m[i] = filled[i * d + 1];
            y[i] = filled[i * d + 2];
        }
        match fit_columns(&x, &m, &y) {
            Ok(t) => pool.push(&t),
            Err(e) => failure = Some(e),
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => pool.finish(),
    }
}

fn replicate(work: &Incomplete, cfg: &ImputationConfig, tree: &SeedTree, b: u64) -> (Option<[f64; 8]>, usize) {
    for attempt in 0..=MAX_RETRIES {
        let mut rng = tree.stream(b | (attempt << 32));
        let idx = resample_indices(work.n(), &mut rng);
        let fit = work.select_rows(&idx).and_then(|w| mi_point(&w, cfg, &mut rng));
        if let Ok(t) = fit {
            return (Some(t.to_array()), attempt as usize);
        }
    }
    (None, MAX_RETRIES as usize + 1)
}

/// Point estimates, bootstrap standard errors and BC intervals for all eight
/// quantities.
///
/// Substream 0 of the seed drives the imputation of the original data and
/// substream `b` drives replicate `b`, so the report does not depend on the
/// number of worker threads. Replicates run on the current rayon pool.
pub fn analyze(ds: &Dataset, opts: &AnalysisOptions) -> Result<BootstrapReport> {
    if opts.n_boot < 2 {
        return Err(Error::TooFewReplicates(opts.n_boot));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::InvalidLevel(opts.level));
    }
    opts.imputation.validate()?;

    let work = Incomplete::from_dataset(ds)?;
    let tree = SeedTree::new(opts.seed);
    let point = mi_point(&work, &opts.imputation, &mut tree.stream(0))?;

    let results: Vec<(Option<[f64; 8]>, usize)> =
        (1..=opts.n_boot as u64).into_par_iter().map(|b| replicate(&work, &opts.imputation, &tree, b)).collect();
    let retries = results.iter().map(|r| r.1).sum();
    let replicate_estimates: Vec<[f64; 8]> = results.into_iter().filter_map(|r| r.0).collect();
    let b_effective = replicate_estimates.len();
    if b_effective == 0 {
        return Err(Error::AllReplicatesFailed(opts.n_boot));
    }

    let point_arr = point.to_array();
    let mut se = [0.0; 8];
    let mut intervals = [(0.0, 0.0); 8];
    let mut column = Vec::with_capacity(b_effective);
    for p in 0..8 {
        column.clear();
        column.extend(replicate_estimates.iter().map(|r| r[p]));
        se[p] = bootstrap_se(&column)?;
        intervals[p] = bc_interval(&column, point_arr[p], opts.level)?;
    }

    Ok(BootstrapReport {
        point,
        replicate_estimates,
        se,
        intervals,
        level: opts.level,
        b_requested: opts.n_boot,
        b_effective,
        retries,
    })
}
