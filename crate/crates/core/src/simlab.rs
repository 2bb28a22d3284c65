//! Simulation studies: data generation from the mediation model, missingness
//! imposition and the bias / coverage / power summaries over replications.

use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{analyze, AnalysisOptions, BootstrapReport};
use crate::dataset::{Column, Dataset, RoleSpec};
use crate::error::{Error, Result};
use crate::estimator::{Param, ThetaVector};
use crate::imputer::ImputationConfig;
use crate::rng::SeedTree;

/// Population values of the generating model. Auxiliary `j` is correlated
/// `aux_corr` with M for even `j` and with Y for odd `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub a: f64,
    pub b: f64,
    pub c_prime: f64,
    pub i_m: f64,
    pub i_y: f64,
    pub var_e_x: f64,
    pub var_e_m: f64,
    pub var_e_y: f64,
    pub aux_corr: f64,
    pub n_aux: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            a: 0.39,
            b: 0.39,
            c_prime: 0.0,
            i_m: 0.0,
            i_y: 0.0,
            var_e_x: 1.0,
            var_e_m: 1.0,
            var_e_y: 1.0,
            aux_corr: 0.5,
            n_aux: 2,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.var_e_x > 0.0 && self.var_e_m > 0.0 && self.var_e_y > 0.0) {
            return Err(Error::InvalidConfig("residual variances must be positive".into()));
        }
        if !(self.aux_corr.abs() < 1.0) {
            return Err(Error::InvalidConfig("auxiliary correlation must lie in (-1, 1)".into()));
        }
        Ok(())
    }

    /// Model-implied Var(M).
    pub fn var_m(&self) -> f64 {
        self.a * self.a * self.var_e_x + self.var_e_m
    }

    /// Model-implied Var(Y).
    pub fn var_y(&self) -> f64 {
        self.b * self.b * self.var_m()
            + self.c_prime * self.c_prime * self.var_e_x
            + 2.0 * self.a * self.b * self.c_prime * self.var_e_x
            + self.var_e_y
    }

    /// True values of the eight reported quantities.
    pub fn truth(&self) -> ThetaVector {
        ThetaVector {
            i_m: self.i_m,
            i_y: self.i_y,
            a: self.a,
            b: self.b,
            c_prime: self.c_prime,
            var_e_m: self.var_e_m,
            var_e_y: self.var_e_y,
            ab: self.a * self.b,
            pooled: false,
        }
    }
}

/// Complete data from the mediation model with columns `x, m, y, a1, a2, ...`.
pub fn generate_mediation_data(gp: &GenParams, n: usize, seed: u64) -> Result<Dataset> {
    gp.validate()?;
    if n < 1 {
        return Err(Error::InvalidConfig("sample size must be at least 1".into()));
    }
    let mut rng = SeedTree::new(seed).stream(0);
    generate_with(gp, n, &mut rng)
}

fn generate_with<R: Rng + ?Sized>(gp: &GenParams, n: usize, rng: &mut R) -> Result<Dataset> {
    let (sd_x, sd_em, sd_ey) = (gp.var_e_x.sqrt(), gp.var_e_m.sqrt(), gp.var_e_y.sqrt());
    let (mean_m, sd_m) = (gp.i_m, gp.var_m().sqrt());
    let (mean_y, sd_y) = (gp.i_y + gp.b * gp.i_m, gp.var_y().sqrt());
    let rho = gp.aux_corr;
    let resid = (1.0 - rho * rho).sqrt();

    let mut x = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut aux = vec![Vec::with_capacity(n); gp.n_aux];
    for _ in 0..n {
        let xi = sd_x * rng.sample::<f64, _>(StandardNormal);
        let mi = gp.i_m + gp.a * xi + sd_em * rng.sample::<f64, _>(StandardNormal);
        let yi = gp.i_y + gp.b * mi + gp.c_prime * xi + sd_ey * rng.sample::<f64, _>(StandardNormal);
        for (j, col) in aux.iter_mut().enumerate() {
            let std = if j % 2 == 0 { (mi - mean_m) / sd_m } else { (yi - mean_y) / sd_y };
            col.push(rho * std + resid * rng.sample::<f64, _>(StandardNormal));
        }
        x.push(xi);
        m.push(mi);
        y.push(yi);
    }

    let aux_names: Vec<String> = (1..=gp.n_aux).map(|j| format!("a{j}")).collect();
    let mut columns = vec![Column::complete("x", x), Column::complete("m", m), Column::complete("y", y)];
    columns.extend(aux.into_iter().zip(&aux_names).map(|(v, name)| Column::complete(name.clone(), v)));
    Dataset::new(columns, &RoleSpec::new("x", "m", "y").with_aux(aux_names))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Mcar,
    Mar,
    Mnar,
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcar" => Ok(Mechanism::Mcar),
            "mar" => Ok(Mechanism::Mar),
            "mnar" => Ok(Mechanism::Mnar),
            other => Err(Error::InvalidConfig(format!("unknown missingness mechanism `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
            Mechanism::Mnar => "mnar",
        })
    }
}

fn check_proportion(q: f64) -> Result<()> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidConfig(format!("missing proportion must lie in [0, 1), got {q}")));
    }
    Ok(())
}

/// `⌊qN⌋`, robust to products such as `0.29 × 100 = 28.999…`.
fn quota(q: f64, n: usize) -> usize {
    ((q * n as f64) + 1e-9).floor() as usize
}

/// Rows with the `k` smallest (or largest) values, ties broken by row index.
fn extreme_rows(values: &[f64], k: usize, largest: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| {
        let ord = values[i].total_cmp(&values[j]);
        if largest {
            ord.reverse()
        } else {
            ord
        }
    });
    idx.truncate(k);
    idx
}

/// Masks exactly `⌊qN⌋` cells of M and of Y.
///
/// * MCAR: independent uniform row subsets for M and Y.
/// * MAR: M for the rows with the largest X, Y for the rows with the smallest X.
/// * MNAR: M for the rows with the smallest first auxiliary, Y for the rows
///   with the smallest second auxiliary.
pub fn impose_missingness(ds: &Dataset, mechanism: Mechanism, proportion: f64, seed: u64) -> Result<Dataset> {
    let mut rng = SeedTree::new(seed).stream(0);
    impose_with(ds, mechanism, proportion, &mut rng)
}

fn impose_with<R: Rng + ?Sized>(ds: &Dataset, mechanism: Mechanism, q: f64, rng: &mut R) -> Result<Dataset> {
    check_proportion(q)?;
    if ds.m().n_missing() + ds.y().n_missing() > 0 {
        return Err(Error::InvalidDataset("M and Y must be complete before imposing missingness".into()));
    }
    let n = ds.n_rows();
    let k = quota(q, n);
    let (rows_m, rows_y) = match mechanism {
        Mechanism::Mcar => (sample(rng, n, k).into_vec(), sample(rng, n, k).into_vec()),
        Mechanism::Mar => {
            let x = ds.x();
            if x.n_missing() > 0 {
                return Err(Error::InvalidDataset("MAR imposition requires X to be fully observed".into()));
            }
            (extreme_rows(&x.values, k, true), extreme_rows(&x.values, k, false))
        }
        Mechanism::Mnar => {
            let aux: Vec<&Column> = ds.bound_columns().skip(3).collect();
            if aux.len() < 2 {
                return Err(Error::InvalidDataset("MNAR imposition requires two auxiliary columns".into()));
            }
            if aux[0].n_missing() + aux[1].n_missing() > 0 {
                return Err(Error::InvalidDataset("auxiliaries must be complete for MNAR imposition".into()));
            }
            (extreme_rows(&aux[0].values, k, false), extreme_rows(&aux[1].values, k, false))
        }
    };

    let mut values: Vec<Vec<f64>> = ds.bound_columns().map(|c| c.values.clone()).collect();
    let mut masks: Vec<Vec<bool>> = ds.bound_columns().map(|c| c.missing.clone()).collect();
    for (col, rows) in [(1, rows_m), (2, rows_y)] {
        for i in rows {
            masks[col][i] = true;
            values[col][i] = f64::NAN;
        }
    }
    Ok(ds.with_bound_values(values, Some(masks)))
}

/// Relative bias ×100 (`100·(mean/truth − 1)`), or `100·(mean − truth)` when
/// the truth is zero.
pub fn evaluate_bias(estimates: &[f64], truth: f64) -> f64 {
    let first = estimates[0];
    let mean = first + estimates.iter().map(|e| e - first).sum::<f64>() / estimates.len() as f64;
    if truth != 0.0 {
        100.0 * (mean / truth - 1.0)
    } else {
        100.0 * (mean - truth)
    }
}

/// Share of intervals with `lo < truth < hi`.
pub fn evaluate_coverage(intervals: &[(f64, f64)], truth: f64) -> f64 {
    let hits = intervals.iter().filter(|(lo, hi)| *lo < truth && truth < *hi).count();
    hits as f64 / intervals.len() as f64
}

/// Share of intervals that exclude zero.
pub fn evaluate_power(intervals: &[(f64, f64)]) -> f64 {
    let hits = intervals.iter().filter(|(lo, hi)| *lo > 0.0 || *hi < 0.0).count();
    hits as f64 / intervals.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub gen: GenParams,
    pub n: usize,
    pub mechanism: Mechanism,
    pub proportion: f64,
    pub use_aux: bool,
    pub reps: usize,
    pub n_boot: usize,
    pub imputation: ImputationConfig,
    pub level: f64,
    pub seed: u64,
}

impl StudyConfig {
    /// The simulation cell used throughout: N = 100, a = b = .39, two
    /// auxiliaries correlated .5 with M and Y.
    pub fn paper_defaults(mechanism: Mechanism, proportion: f64, use_aux: bool) -> Self {
        Self {
            gen: GenParams::default(),
            n: 100,
            mechanism,
            proportion,
            use_aux,
            reps: 1000,
            n_boot: 1000,
            imputation: ImputationConfig::with_imputations(100),
            level: 0.95,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        check_proportion(self.proportion)?;
        if self.reps < 1 {
            return Err(Error::InvalidConfig("at least one replication is required".into()));
        }
        if self.n < 4 {
            return Err(Error::InvalidConfig("sample size must be at least 4".into()));
        }
        if self.mechanism == Mechanism::Mnar && self.gen.n_aux < 2 {
            return Err(Error::InvalidConfig("MNAR requires two generated auxiliaries".into()));
        }
        if self.n_boot < 2 {
            return Err(Error::TooFewReplicates(self.n_boot));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidLevel(self.level));
        }
        self.imputation.validate()
    }

    fn analysis_options(&self, seed: u64) -> AnalysisOptions {
        AnalysisOptions { n_boot: self.n_boot, imputation: self.imputation, level: self.level, seed }
    }
}

/// Generated dataset (with missingness imposed) for replication `r`. Does not
/// depend on `use_aux`.
pub fn replication_data(cfg: &StudyConfig, r: u64) -> Result<Dataset> {
    let tree = SeedTree::new(cfg.seed).child(r);
    let full = generate_with(&cfg.gen, cfg.n, &mut tree.stream(0))?;
    impose_with(&full, cfg.mechanism, cfg.proportion, &mut tree.stream(1))
}

fn replication_seed(cfg: &StudyConfig, r: u64) -> u64 {
    SeedTree::new(cfg.seed).child(r).child(2).key()
}

/// Whether a row reports power or Type I error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionKind {
    Power,
    TypeI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub param: Param,
    pub truth: f64,
    /// Relative bias ×100 (absolute ×100 for zero truths).
    pub bias: f64,
    pub coverage: f64,
    pub rejection_rate: f64,
    pub kind: RejectionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMeta {
    pub mechanism: Mechanism,
    pub proportion: f64,
    pub use_aux: bool,
    pub n: usize,
    pub reps: usize,
    pub reps_failed: usize,
    pub n_boot: usize,
    pub n_imputations: usize,
    pub level: f64,
    pub seed: u64,
    /// Bootstrap replicates dropped across all replications.
    pub dropped_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    /// In [`Param::REPORT_ORDER`].
    pub rows: Vec<StudyRow>,
    pub meta: StudyMeta,
    /// Excluded from serialized output so reports stay reproducible.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl StudyReport {
    pub fn row(&self, p: Param) -> &StudyRow {
        self.rows.iter().find(|r| r.param == p).expect("every parameter has a row")
    }
}

/// Per-replication analysis results.
#[derive(Debug, Clone)]
pub struct Replication {
    pub index: usize,
    pub result: std::result::Result<BootstrapReport, String>,
}

/// Runs every replication; failures are kept as error strings.
pub fn run_replications(cfg: &StudyConfig) -> Result<Vec<Replication>> {
    cfg.validate()?;
    Ok((0..cfg.reps as u64)
        .into_par_iter()
        .map(|r| {
            let result = replication_data(cfg, r)
                .map(|ds| if cfg.use_aux { ds } else { ds.without_aux() })
                .and_then(|ds| analyze(&ds, &cfg.analysis_options(replication_seed(cfg, r))))
                .map_err(|e| e.to_string());
            Replication { index: r as usize, result }
        })
        .collect())
}

/// Aggregates replications into the bias / coverage / power table.
pub fn summarize(cfg: &StudyConfig, reps: &[Replication]) -> Result<StudyReport> {
    let ok: Vec<&BootstrapReport> = reps.iter().filter_map(|r| r.result.as_ref().ok()).collect();
    if ok.is_empty() {
        return Err(Error::InvalidConfig(format!("all {} replications failed", reps.len())));
    }
    let truth = cfg.gen.truth();
    let rows = Param::REPORT_ORDER
        .iter()
        .map(|&p| {
            let estimates: Vec<f64> = ok.iter().map(|r| r.point.get(p)).collect();
            let intervals: Vec<(f64, f64)> = ok.iter().map(|r| r.interval_of(p)).collect();
            let t = truth.get(p);
            StudyRow {
                param: p,
                truth: t,
                bias: evaluate_bias(&estimates, t),
                coverage: evaluate_coverage(&intervals, t),
                rejection_rate: evaluate_power(&intervals),
                kind: if t == 0.0 { RejectionKind::TypeI } else { RejectionKind::Power },
            }
        })
        .collect();
    Ok(StudyReport {
        rows,
        meta: StudyMeta {
            mechanism: cfg.mechanism,
            proportion: cfg.proportion,
            use_aux: cfg.use_aux,
            n: cfg.n,
            reps: cfg.reps,
            reps_failed: reps.len() - ok.len(),
            n_boot: cfg.n_boot,
            n_imputations: cfg.imputation.n_imputations,
            level: cfg.level,
            seed: cfg.seed,
            dropped_replicates: ok.iter().map(|r| r.dropped()).sum(),
        },
        wall_time_secs: 0.0,
    })
}

/// Generate → impose missingness → (drop auxiliaries) → analyze, `R` times,
/// then summarize against the generating values.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    let started = Instant::now();
    let reps = run_replications(cfg)?;
    let mut report = summarize(cfg, &reps)?;
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub k: usize,
    pub estimate: f64,
    pub se: f64,
    /// `(estimate_K − estimate_ref) / estimate_ref` for `ab`.
    pub estimate_deviance: f64,
    /// Same for the bootstrap SE of `ab`.
    pub se_deviance: f64,
}

/// Relative deviances of the `ab` estimate and its bootstrap SE for each
/// imputation count, measured against `k_ref` imputations. All runs share
/// the dataset (replication 0 of `cfg`) and the analysis seed.
pub fn imputation_sensitivity(cfg: &StudyConfig, k_grid: &[usize], k_ref: usize) -> Result<Vec<SensitivityRow>> {
    cfg.validate()?;
    if k_ref < 1 || k_grid.iter().any(|&k| k < 1) {
        return Err(Error::InvalidConfig("imputation counts must be at least 1".into()));
    }
    if k_grid.iter().any(|&k| k > k_ref) {
        return Err(Error::InvalidConfig("reference imputation count must be at least max(k-grid)".into()));
    }
    let ds = replication_data(cfg, 0)?;
    let ds = if cfg.use_aux { ds } else { ds.without_aux() };
    let seed = replication_seed(cfg, 0);
    let run = |k: usize| -> Result<(f64, f64)> {
        let mut opts = cfg.analysis_options(seed);
        opts.imputation.n_imputations = k;
        let rep = analyze(&ds, &opts)?;
        Ok((rep.point.ab, rep.se_of(Param::AB)))
    };
    let (est_ref, se_ref) = run(k_ref)?;
    if est_ref == 0.0 || se_ref == 0.0 {
        return Err(Error::UndefinedDeviance);
    }
    k_grid
        .iter()
        .map(|&k| {
            let (estimate, se) = if k == k_ref { (est_ref, se_ref) } else { run(k)? };
            Ok(SensitivityRow {
                k,
                estimate,
                se,
                estimate_deviance: (estimate - est_ref) / est_ref,
                se_deviance: (se - se_ref) / se_ref,
            })
        })
        .collect()
}
