use serde::{Deserialize, Serialize};

use super::work::{Incomplete, PatternGroup};
use super::MvnParams;
use crate::error::Result;
use crate::linalg::{backward_solve_t, chol_logdet, cholesky_repaired, forward_solve};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFit {
    pub params: MvnParams,
    /// Number of M-steps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Observed-data log-likelihood at the start of each iteration, followed
    /// by its value at the returned estimate.
    pub loglik: Vec<f64>,
}

/// Regression of the missing block on the observed block for one pattern.
#[derive(Debug, Default)]
pub(super) struct Conditional {
    p_o: usize,
    p_m: usize,
    /// Cholesky factor of Σ_oo (`p_o × p_o`).
    pub l_oo: Vec<f64>,
    /// Σ_mo Σ_oo⁻¹ (`p_m × p_o`).
    pub beta: Vec<f64>,
    /// Σ_mm − Σ_mo Σ_oo⁻¹ Σ_om (`p_m × p_m`).
    pub cov: Vec<f64>,
    soo: Vec<f64>,
    rhs: Vec<f64>,
}

impl Conditional {
    pub fn compute(&mut self, sigma: &[f64], d: usize, g: &PatternGroup, ridge_rel: f64) -> Result<()> {
        let (p_o, p_m) = (g.obs.len(), g.mis.len());
        self.p_o = p_o;
        self.p_m = p_m;
        self.soo.clear();
        for &a in &g.obs {
            self.soo.extend(g.obs.iter().map(|&b| sigma[a * d + b]));
        }
        self.l_oo.resize(p_o * p_o, 0.0);
        cholesky_repaired(&self.soo, p_o, ridge_rel, &mut self.l_oo)?;

        self.beta.resize(p_m * p_o, 0.0);
        self.rhs.resize(p_o, 0.0);
        for (r, &j) in g.mis.iter().enumerate() {
            for (a, &o) in g.obs.iter().enumerate() {
                self.rhs[a] = sigma[o * d + j];
            }
            forward_solve(&self.l_oo, p_o, &mut self.rhs);
            backward_solve_t(&self.l_oo, p_o, &mut self.rhs);
            self.beta[r * p_o..(r + 1) * p_o].copy_from_slice(&self.rhs);
        }

        self.cov.resize(p_m * p_m, 0.0);
        for (r, &j) in g.mis.iter().enumerate() {
            for (s, &k) in g.mis.iter().enumerate() {
                let adj: f64 = g.obs.iter().enumerate().map(|(a, &o)| self.beta[r * p_o + a] * sigma[o * d + k]).sum();
                self.cov[r * p_m + s] = sigma[j * d + k] - adj;
            }
        }
        // symmetrize against rounding
        for r in 0..p_m {
            for s in 0..r {
                let v = 0.5 * (self.cov[r * p_m + s] + self.cov[s * p_m + r]);
                self.cov[r * p_m + s] = v;
                self.cov[s * p_m + r] = v;
            }
        }
        Ok(())
    }

    /// Conditional mean of the missing block: `mu_m + β (z_o − mu_o)`.
    pub fn mean_into(&self, g: &PatternGroup, row: &[f64], mu: &[f64], out: &mut [f64]) {
        let p_o = self.p_o;
        for ((r, &j), o) in g.mis.iter().enumerate().zip(out.iter_mut()) {
            let b = &self.beta[r * p_o..(r + 1) * p_o];
            *o = mu[j] + b.iter().zip(&g.obs).map(|(bv, &k)| bv * (row[k] - mu[k])).sum::<f64>();
        }
    }
}

/// Observed-data log-likelihood of centered data `z` at (mu, sigma).
fn loglik_at(work: &Incomplete, z: &[f64], mu: &[f64], sigma: &[f64], ridge_rel: f64) -> Result<f64> {
    let d = work.dim();
    let mut total = 0.0;
    let mut sub = Vec::new();
    let mut l = Vec::new();
    let mut diff = Vec::new();
    for g in work.groups() {
        let p_o = g.obs.len();
        sub.clear();
        for &a in &g.obs {
            sub.extend(g.obs.iter().map(|&b| sigma[a * d + b]));
        }
        l.resize(p_o * p_o, 0.0);
        cholesky_repaired(&sub, p_o, ridge_rel, &mut l)?;
        let logdet = chol_logdet(&l, p_o);
        for &i in &g.rows {
            let row = &z[i * d..(i + 1) * d];
            diff.clear();
            diff.extend(g.obs.iter().map(|&o| row[o] - mu[o]));
            forward_solve(&l, p_o, &mut diff);
            let q: f64 = diff.iter().map(|v| v * v).sum();
            total -= 0.5 * (p_o as f64 * LN_2PI + logdet + q);
        }
    }
    Ok(total)
}

/// EM on a prepared work matrix. Computation runs on data centered at the
/// observed means.
pub(crate) fn em_work(work: &Incomplete, max_iter: usize, tol: f64, ridge_rel: f64) -> Result<EmFit> {
    let (n, d) = (work.n(), work.dim());
    let shift = work.observed_means();
    let z: Vec<f64> = work.values().iter().enumerate().map(|(k, v)| v - shift[k % d]).collect();

    let mut mu = vec![0.0; d];
    let mut sigma = vec![0.0; d * d];
    for (j, v) in work.observed_variances(&shift).into_iter().enumerate() {
        sigma[j * d + j] = v;
    }

    let single_step = work.n_missing() == 0;
    let mut cond = Conditional::default();
    let mut zhat = vec![0.0; d];
    let mut mis_vals = vec![0.0; d];
    let mut t1 = vec![0.0; d];
    let mut t2 = vec![0.0; d * d];
    let mut loglik = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter.max(1) {
        loglik.push(loglik_at(work, &z, &mu, &sigma, ridge_rel)?);
        t1.iter_mut().for_each(|v| *v = 0.0);
        t2.iter_mut().for_each(|v| *v = 0.0);

        for g in work.groups() {
            if !g.mis.is_empty() {
                cond.compute(&sigma, d, g, ridge_rel)?;
            }
            let p_m = g.mis.len();
            for &i in &g.rows {
                let row = &z[i * d..(i + 1) * d];
                zhat.copy_from_slice(row);
                if p_m > 0 {
                    cond.mean_into(g, row, &mu, &mut mis_vals[..p_m]);
                    for (r, &j) in g.mis.iter().enumerate() {
                        zhat[j] = mis_vals[r];
                    }
                }
                for a in 0..d {
                    t1[a] += zhat[a];
                    for b in a..d {
                        t2[a * d + b] += zhat[a] * zhat[b];
                    }
                }
                for (r, &j) in g.mis.iter().enumerate() {
                    for (s, &k) in g.mis.iter().enumerate() {
                        if j <= k {
                            t2[j * d + k] += cond.cov[r * p_m + s];
                        }
                    }
                }
            }
        }

        let nf = n as f64;
        let mut change: f64 = 0.0;
        let new_mu: Vec<f64> = t1.iter().map(|v| v / nf).collect();
        for a in 0..d {
            change = change.max((new_mu[a] - mu[a]).abs());
        }
        for a in 0..d {
            for b in a..d {
                let v = t2[a * d + b] / nf - new_mu[a] * new_mu[b];
                change = change.max((v - sigma[a * d + b]).abs());
                sigma[a * d + b] = v;
                sigma[b * d + a] = v;
            }
        }
        mu = new_mu;
        iterations += 1;
        if single_step || change < tol {
            converged = true;
            break;
        }
    }
    loglik.push(loglik_at(work, &z, &mu, &sigma, ridge_rel)?);

    let mu = mu.iter().zip(&shift).map(|(m, c)| m + c).collect();
    Ok(EmFit { params: MvnParams { mu, sigma }, iterations, converged, loglik })
}
