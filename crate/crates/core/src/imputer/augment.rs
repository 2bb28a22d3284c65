use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::em::em_work;
use super::work::Incomplete;
use super::{ImputationConfig, MvnParams};
use crate::error::{Error, Result};
use crate::linalg::{backward_solve_t, cholesky_repaired, forward_solve, lower_inverse};

/// EM followed by a data-augmentation chain; calls `emit` with each of the
/// `K` completed row-major matrices. With no missing cells the input matrix is
/// emitted `K` times and no randomness is consumed.
pub(crate) fn multiply_impute<R, F>(work: &Incomplete, cfg: &ImputationConfig, rng: &mut R, mut emit: F) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]),
{
    if work.n_missing() == 0 {
        for _ in 0..cfg.n_imputations {
            emit(work.values());
        }
        return Ok(());
    }
    let em = em_work(work, cfg.em_max_iter, cfg.em_tol, cfg.ridge_rel)?;
    run_chain(work, &em.params, cfg, rng, emit)
}

fn divergence(e: Error, what: &'static str) -> Error {
    match e {
        Error::NonPositiveDefinite => Error::ChainDivergence(what),
        other => other,
    }
}

/// Per-pattern draw of the missing block, parameterized by the precision
/// matrix Λ = Σ⁻¹: the conditional covariance is Λ_mm⁻¹ and the regression
/// on the observed block is −Λ_mm⁻¹ Λ_mo.
#[derive(Debug)]
struct PatternDraw {
    obs: Vec<usize>,
    mis: Vec<usize>,
    rows: Vec<usize>,
    /// (a, b, a·d + b) with a ≤ b and at least one of a, b missing.
    pairs: Vec<(usize, usize, usize)>,
    /// Cholesky factor of Λ_mm.
    l: Vec<f64>,
    beta: Vec<f64>,
    intercept: Vec<f64>,
    rhs: Vec<f64>,
}

impl PatternDraw {
    fn new(obs: &[usize], mis: &[usize], rows: &[usize], d: usize) -> Self {
        let mut is_mis = vec![false; d];
        mis.iter().for_each(|&j| is_mis[j] = true);
        let mut pairs = Vec::new();
        for a in 0..d {
            for b in a..d {
                if is_mis[a] || is_mis[b] {
                    pairs.push((a, b, a * d + b));
                }
            }
        }
        let (p_o, p_m) = (obs.len(), mis.len());
        Self {
            obs: obs.to_vec(),
            mis: mis.to_vec(),
            rows: rows.to_vec(),
            pairs,
            l: vec![0.0; p_m * p_m],
            beta: vec![0.0; p_m * p_o],
            intercept: vec![0.0; p_m],
            rhs: vec![0.0; p_m],
        }
    }

    fn update(&mut self, lambda: &[f64], mu: &[f64], d: usize, ridge_rel: f64, scratch: &mut Vec<f64>) -> Result<()> {
        let (p_o, p_m) = (self.obs.len(), self.mis.len());
        scratch.clear();
        for &j in &self.mis {
            scratch.extend(self.mis.iter().map(|&k| lambda[j * d + k]));
        }
        cholesky_repaired(scratch, p_m, ridge_rel, &mut self.l)?;
        for (a, &o) in self.obs.iter().enumerate() {
            for (r, &j) in self.mis.iter().enumerate() {
                self.rhs[r] = lambda[j * d + o];
            }
            forward_solve(&self.l, p_m, &mut self.rhs);
            backward_solve_t(&self.l, p_m, &mut self.rhs);
            for r in 0..p_m {
                self.beta[r * p_o + a] = -self.rhs[r];
            }
        }
        for ((c, &j), b) in self.intercept.iter_mut().zip(&self.mis).zip(self.beta.chunks_exact(p_o.max(1))) {
            *c = mu[j] - b.iter().zip(&self.obs).map(|(bv, &o)| bv * mu[o]).sum::<f64>();
        }
        Ok(())
    }
}

/// Λ = Σ⁻¹ through the Cholesky factor of Σ.
fn precision(sigma: &[f64], d: usize, ridge_rel: f64, l: &mut [f64], l_inv: &mut [f64], out: &mut [f64]) -> Result<()> {
    cholesky_repaired(sigma, d, ridge_rel, l)?;
    lower_inverse(l, d, l_inv);
    for a in 0..d {
        for b in a..d {
            let v: f64 = (b..d).map(|k| l_inv[k * d + a] * l_inv[k * d + b]).sum();
            out[a * d + b] = v;
            out[b * d + a] = v;
        }
    }
    Ok(())
}

/// Data augmentation started at `start`. After `burn_in` iterations one
/// completed matrix is emitted every `thin` iterations (right after the
/// I-step) until `K` have been produced.
pub(crate) fn run_chain<R, F>(
    work: &Incomplete,
    start: &MvnParams,
    cfg: &ImputationConfig,
    rng: &mut R,
    mut emit: F,
) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]),
{
    let (n, d) = (work.n(), work.dim());
    let nf = n as f64;
    if n <= d {
        return Err(Error::ChainDivergence("fewer rows than needed for the covariance posterior"));
    }
    let shift = &start.mu;
    let mut z: Vec<f64> = work.values().iter().enumerate().map(|(k, v)| v - shift[k % d]).collect();
    let mut filled = work.values().to_vec();
    let mut mu = vec![0.0; d];
    let mut sigma = start.sigma.clone();

    // Sums over observed cells do not change between iterations.
    let mut fixed_t1 = vec![0.0; d];
    let mut fixed_t2 = vec![0.0; d * d];
    let mut draws = Vec::new();
    for g in work.groups() {
        for &i in &g.rows {
            let row = &z[i * d..(i + 1) * d];
            for &a in &g.obs {
                fixed_t1[a] += row[a];
                for &b in g.obs.iter().filter(|&&b| b >= a) {
                    fixed_t2[a * d + b] += row[a] * row[b];
                }
            }
        }
        if !g.mis.is_empty() {
            draws.push(PatternDraw::new(&g.obs, &g.mis, &g.rows, d));
        }
    }

    // Bartlett diagonal: χ²(ν − i), ν = n − 1.
    let chi: Vec<ChiSquared<f64>> =
        (0..d).map(|i| ChiSquared::new((n - 1 - i) as f64).expect("positive degrees of freedom")).collect();

    let mut scratch = Vec::new();
    let mut lambda = vec![0.0; d * d];
    let mut l_sigma = vec![0.0; d * d];
    let mut l_sigma_inv = vec![0.0; d * d];
    let mut eps = vec![0.0; d];
    let mut t1 = vec![0.0; d];
    let mut t2 = vec![0.0; d * d];
    let mut l_s = vec![0.0; d * d];
    let mut bart = vec![0.0; d * d];
    let mut bart_inv = vec![0.0; d * d];
    let mut root = vec![0.0; d * d];

    let mut emitted = 0;
    let mut iteration = 0usize;
    loop {
        iteration += 1;

        // I-step, accumulating the completed-data sums as rows are filled
        precision(&sigma, d, cfg.ridge_rel, &mut l_sigma, &mut l_sigma_inv, &mut lambda)
            .map_err(|e| divergence(e, "covariance draw"))?;
        t1.copy_from_slice(&fixed_t1);
        t2.copy_from_slice(&fixed_t2);
        for g in draws.iter_mut() {
            g.update(&lambda, &mu, d, cfg.ridge_rel, &mut scratch)
                .map_err(|e| divergence(e, "conditional precision"))?;
            let (p_o, p_m) = (g.obs.len(), g.mis.len());
            for &i in &g.rows {
                let row = &mut z[i * d..(i + 1) * d];
                let e = &mut eps[..p_m];
                for v in e.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                backward_solve_t(&g.l, p_m, e);
                for (r, &j) in g.mis.iter().enumerate() {
                    let b = &g.beta[r * p_o..(r + 1) * p_o];
                    let mean = g.intercept[r] + b.iter().zip(&g.obs).map(|(bv, &o)| bv * row[o]).sum::<f64>();
                    row[j] = mean + e[r];
                }
                for &j in &g.mis {
                    t1[j] += row[j];
                }
                for &(a, b, k) in &g.pairs {
                    t2[k] += row[a] * row[b];
                }
            }
        }

        if iteration > cfg.burn_in && (iteration - cfg.burn_in).is_multiple_of(cfg.thin) {
            for g in &draws {
                for &i in &g.rows {
                    for &j in &g.mis {
                        filled[i * d + j] = z[i * d + j] + shift[j];
                    }
                }
            }
            emit(&filled);
            emitted += 1;
            if emitted == cfg.n_imputations {
                return Ok(());
            }
        }

        // P-step: Σ ~ IW(n − 1, S), μ | Σ ~ N(ȳ, Σ/n)
        for v in t1.iter_mut() {
            *v /= nf;
        }
        for a in 0..d {
            for b in a..d {
                let s = t2[a * d + b] - nf * t1[a] * t1[b];
                t2[a * d + b] = s;
                t2[b * d + a] = s;
            }
        }
        cholesky_repaired(&t2, d, cfg.ridge_rel, &mut l_s).map_err(|e| divergence(e, "completed-data scatter"))?;

        bart.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            bart[i * d + i] = chi[i].sample(rng).sqrt();
            for j in 0..i {
                bart[i * d + j] = rng.sample(StandardNormal);
            }
        }
        lower_inverse(&bart, d, &mut bart_inv);
        // root = L_S · A⁻ᵀ, so that Σ = root · rootᵀ
        for (i, (out, li)) in root.chunks_exact_mut(d).zip(l_s.chunks_exact(d)).enumerate() {
            for (j, (o, bj)) in out.iter_mut().zip(bart_inv.chunks_exact(d)).enumerate() {
                let k = i.min(j) + 1;
                *o = li[..k].iter().zip(&bj[..k]).map(|(x, y)| x * y).sum();
            }
        }
        for a in 0..d {
            let ra = &root[a * d..(a + 1) * d];
            for b in a..d {
                let v: f64 = ra.iter().zip(&root[b * d..(b + 1) * d]).map(|(x, y)| x * y).sum();
                sigma[a * d + b] = v;
                sigma[b * d + a] = v;
            }
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::ChainDivergence("non-finite covariance draw"));
        }

        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        let scale = nf.sqrt().recip();
        for ((m, ra), t) in mu.iter_mut().zip(root.chunks_exact(d)).zip(&t1) {
            let noise: f64 = ra.iter().zip(&eps).map(|(x, y)| x * y).sum();
            *m = t + noise * scale;
        }
    }
}
