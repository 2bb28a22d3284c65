use medboot::{em_mvn, impute, Column, Dataset, Error, ImputationConfig, RoleSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn roles() -> RoleSpec {
    RoleSpec::new("x", "m", "y")
}

fn masked(name: &str, values: Vec<f64>, missing: Vec<bool>) -> Column {
    Column { name: name.into(), values, missing }
}

/// Draws `n` rows from N(mu, L Lᵀ).
fn mvn_rows(n: usize, mu: &[f64], l: &[f64], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let d = mu.len();
    (0..n)
        .map(|_| {
            let e: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            (0..d).map(|i| mu[i] + (0..=i).map(|k| l[i * d + k] * e[k]).sum::<f64>()).collect()
        })
        .collect()
}

fn dataset_from_rows(rows: &[Vec<f64>], masks: &[Vec<bool>]) -> Dataset {
    let names = ["x", "m", "y"];
    let columns = (0..3)
        .map(|j| masked(names[j], rows.iter().map(|r| r[j]).collect(), masks.iter().map(|m| m[j]).collect()))
        .collect();
    Dataset::new(columns, &roles()).unwrap()
}

/// Correlated trivariate data with `q` MCAR holes in M and Y.
fn mcar_data(n: usize, q: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = [1.0, 0.0, 0.0, 0.6, 0.8, 0.0, 0.3, 0.5, 0.8];
    let rows = mvn_rows(n, &[0.5, -1.0, 2.0], &l, &mut rng);
    let masks: Vec<Vec<bool>> = (0..n).map(|_| vec![false, rng.random::<f64>() < q, rng.random::<f64>() < q]).collect();
    dataset_from_rows(&rows, &masks)
}

#[test]
fn em_on_complete_data_is_sample_moments_in_one_step() {
    let ds = mcar_data(60, 0.0, 3);
    let fit = em_mvn(&ds, 500, 1e-8).unwrap();
    assert_eq!(fit.iterations, 1);
    assert!(fit.converged);
    let cols: Vec<&Vec<f64>> = vec![&ds.x().values, &ds.m().values, &ds.y().values];
    let n = 60.0;
    for a in 0..3 {
        let ma = cols[a].iter().sum::<f64>() / n;
        assert!((fit.params.mu[a] - ma).abs() < 1e-12);
        for b in 0..3 {
            let mb = cols[b].iter().sum::<f64>() / n;
            let cov = cols[a].iter().zip(cols[b]).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>() / n;
            assert!((fit.params.cov(a, b) - cov).abs() < 1e-12, "cov({a},{b})");
        }
    }
}

#[test]
fn em_recovers_bivariate_normal_with_mcar_holes() {
    // (X, M) carry the bivariate model; Y is an independent, fully observed third variable.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let r = 0.5f64;
    let l = [1.0, 0.0, 0.0, r, (1.0 - r * r).sqrt(), 0.0, 0.0, 0.0, 1.0];
    let n = 10_000;
    let rows = mvn_rows(n, &[0.0, 0.0, 0.0], &l, &mut rng);
    let masks: Vec<Vec<bool>> =
        (0..n).map(|_| vec![rng.random::<f64>() < 0.2, rng.random::<f64>() < 0.2, false]).collect();
    let ds = dataset_from_rows(&rows, &masks);
    let fit = em_mvn(&ds, 500, 1e-8).unwrap();
    assert!(fit.converged);
    for a in 0..2 {
        assert!(fit.params.mu[a].abs() < 0.05, "mu[{a}] = {}", fit.params.mu[a]);
    }
    for (a, b, truth) in [(0, 0, 1.0), (0, 1, 0.5), (1, 1, 1.0)] {
        assert!((fit.params.cov(a, b) - truth).abs() < 0.10, "sigma[{a}{b}] = {}", fit.params.cov(a, b));
    }
}

#[test]
fn em_loglik_never_decreases() {
    for seed in 0..10 {
        let ds = mcar_data(80, 0.3, seed);
        let fit = em_mvn(&ds, 500, 1e-10).unwrap();
        assert!(fit.loglik.len() >= 2);
        for w in fit.loglik.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn all_missing_column_is_rejected() {
    let n = 10;
    let ds = Dataset::new(
        vec![
            Column::complete("x", (0..n).map(|i| i as f64).collect()),
            masked("m", vec![0.0; n], vec![true; n]),
            Column::complete("y", (0..n).map(|i| (i * i) as f64).collect()),
        ],
        &roles(),
    )
    .unwrap();
    assert!(matches!(em_mvn(&ds, 500, 1e-8), Err(Error::AllMissingColumn(ref c)) if c == "m"));
    assert!(matches!(impute(&ds, &ImputationConfig::with_imputations(2), 1), Err(Error::AllMissingColumn(_))));
}

#[test]
fn complete_data_yields_identical_copies() {
    let ds = mcar_data(30, 0.0, 5);
    for seed in [0, 1, 99] {
        let out = impute(&ds, &ImputationConfig::with_imputations(4), seed).unwrap();
        assert_eq!(out.len(), 4);
        for c in &out {
            assert_eq!(c, &ds);
        }
    }
}

#[test]
fn single_hole_draws_center_on_em_conditional_mean() {
    let mut ds = mcar_data(200, 0.0, 17);
    let row = 42;
    let mut cols = ds.columns().to_vec();
    cols[1].missing[row] = true;
    ds = Dataset::new(cols, &roles()).unwrap();

    let em = em_mvn(&ds, 500, 1e-10).unwrap();
    // E[M | X, Y] from the EM estimate
    let s = DMatrix::from_row_slice(3, 3, &em.params.sigma);
    let s_oo = DMatrix::from_row_slice(2, 2, &[s[(0, 0)], s[(0, 2)], s[(2, 0)], s[(2, 2)]]);
    let s_mo = DVector::from_vec(vec![s[(1, 0)], s[(1, 2)]]);
    let z_o = DVector::from_vec(vec![ds.x().values[row] - em.params.mu[0], ds.y().values[row] - em.params.mu[2]]);
    let beta = s_oo.cholesky().unwrap().solve(&s_mo);
    let cond_mean = em.params.mu[1] + beta.dot(&z_o);
    let cond_var = s[(1, 1)] - beta.dot(&s_mo);

    let k = 2000;
    let draws: Vec<f64> =
        impute(&ds, &ImputationConfig::with_imputations(k), 8).unwrap().iter().map(|c| c.m().values[row]).collect();
    let mean = draws.iter().sum::<f64>() / k as f64;
    let sd = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k as f64 - 1.0)).sqrt();
    let mcse = sd / (k as f64).sqrt();
    assert!((mean - cond_mean).abs() < 4.0 * mcse, "mean {mean}, EM {cond_mean}, mcse {mcse}");
    // parameter uncertainty inflates the predictive variance by O(d/n)
    let ratio = sd * sd / cond_var;
    assert!((0.9..1.15).contains(&ratio), "variance ratio {ratio}");
}

#[test]
fn imputation_is_deterministic_and_preserves_observed_cells() {
    let ds = mcar_data(50, 0.25, 23);
    let cfg = ImputationConfig { burn_in: 20, thin: 5, ..ImputationConfig::with_imputations(6) };
    let a = impute(&ds, &cfg, 4).unwrap();
    let b = impute(&ds, &cfg, 4).unwrap();
    assert_eq!(a, b);
    let c = impute(&ds, &cfg, 5).unwrap();
    assert_ne!(a, c);

    for done in &a {
        for (orig, filled) in ds.bound_columns().zip(done.bound_columns()) {
            assert!(filled.missing.iter().all(|&m| !m));
            for i in 0..ds.n_rows() {
                assert!(filled.values[i].is_finite());
                if !orig.missing[i] {
                    assert_eq!(orig.values[i].to_bits(), filled.values[i].to_bits());
                }
            }
        }
    }
}

#[test]
fn masked_cell_contents_are_ignored() {
    let ds = mcar_data(50, 0.25, 29);
    let mut cols = ds.columns().to_vec();
    for c in cols.iter_mut() {
        for i in 0..c.values.len() {
            if c.missing[i] {
                c.values[i] = 1e300;
            }
        }
    }
    let poisoned = Dataset::new(cols, &roles()).unwrap();
    let cfg = ImputationConfig { burn_in: 10, thin: 3, ..ImputationConfig::with_imputations(3) };
    assert_eq!(impute(&ds, &cfg, 1).unwrap(), impute(&poisoned, &cfg, 1).unwrap());
    assert_eq!(em_mvn(&ds, 500, 1e-8).unwrap(), em_mvn(&poisoned, 500, 1e-8).unwrap());
}

#[test]
fn imputed_values_vary_across_imputations() {
    let ds = mcar_data(40, 0.2, 31);
    let cfg = ImputationConfig { burn_in: 10, thin: 2, ..ImputationConfig::with_imputations(5) };
    let out = impute(&ds, &cfg, 2).unwrap();
    for (j, col) in ds.bound_columns().enumerate() {
        for i in (0..ds.n_rows()).filter(|&i| col.missing[i]) {
            let vals: Vec<f64> = out.iter().map(|c| c.bound_columns().nth(j).unwrap().values[i]).collect();
            assert!(vals.iter().any(|v| *v != vals[0]), "cell ({i}, {j}) never moved");
        }
    }
}

#[test]
fn imputed_means_approach_em_means() {
    let ds = mcar_data(150, 0.3, 37);
    let em = em_mvn(&ds, 500, 1e-10).unwrap();
    let cfg = ImputationConfig { thin: 20, ..ImputationConfig::with_imputations(400) };
    let out = impute(&ds, &cfg, 3).unwrap();
    for j in 0..3 {
        let mean: f64 =
            out.iter().map(|c| c.bound_columns().nth(j).unwrap().values.iter().sum::<f64>() / 150.0).sum::<f64>()
                / out.len() as f64;
        let se = (em.params.cov(j, j) / 150.0).sqrt();
        assert!((mean - em.params.mu[j]).abs() < 0.5 * se, "var {j}: {mean} vs {}", em.params.mu[j]);
    }
}

#[test]
fn invalid_configuration_is_rejected() {
    let ds = mcar_data(20, 0.2, 1);
    assert!(matches!(impute(&ds, &ImputationConfig::with_imputations(0), 1), Err(Error::InvalidConfig(_))));
    let cfg = ImputationConfig { thin: 0, ..ImputationConfig::default() };
    assert!(matches!(impute(&ds, &cfg, 1), Err(Error::InvalidConfig(_))));
}
