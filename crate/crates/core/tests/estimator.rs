use medboot::estimator::fit_columns;
use medboot::{pool_point_estimates, sobel_se, ThetaVector};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use proptest::prelude::*;

/// Ordinary least squares through nalgebra's SVD; coefficients and SSE.
fn svd_ols(design: DMatrix<f64>, target: &[f64]) -> (Vec<f64>, f64) {
    let t = DVector::from_column_slice(target);
    let coef = design.clone().svd(true, true).solve(&t, 1e-14).unwrap();
    let sse = (t - design * &coef).norm_squared();
    (coef.iter().copied().collect(), sse)
}

fn arb_design() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (8usize..60).prop_flat_map(|n| {
        let v = move || proptest::collection::vec(-5.0f64..5.0, n);
        (v(), v(), v(), -2.0f64..2.0, -2.0f64..2.0).prop_map(|(x, em, ey, a, b)| {
            let m: Vec<f64> = x.iter().zip(&em).map(|(xi, e)| 1.0 + a * xi + e).collect();
            let y: Vec<f64> = x.iter().zip(&m).zip(&ey).map(|((xi, mi), e)| -0.5 + b * mi + 0.3 * xi + e).collect();
            (x, m, y)
        })
    })
}

proptest! {
    #[test]
    fn closed_form_matches_svd_least_squares((x, m, y) in arb_design()) {
        let n = x.len();
        let t = fit_columns(&x, &m, &y).unwrap();
        let (c1, sse1) = svd_ols(DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] }), &m);
        let (c2, sse2) = svd_ols(DMatrix::from_fn(n, 3, |i, j| [1.0, m[i], x[i]][j]), &y);
        let want = [c1[0], c2[0], c1[1], c2[1], c2[2], sse1 / (n - 2) as f64, sse2 / (n - 3) as f64, c1[1] * c2[1]];
        for (g, w) in t.to_array().iter().zip(want) {
            prop_assert!((g - w).abs() <= 1e-9 * (1.0 + w.abs()), "{g} vs {w}");
        }
    }

    #[test]
    fn sobel_is_the_gradient_quadratic_form(a in -3.0f64..3.0, b in -3.0f64..3.0,
                                            va in 0.0f64..2.0, vb in 0.0f64..2.0, rho in -1.0f64..1.0) {
        let cov = rho * (va * vb).sqrt();
        let g = Vector2::new(b, a);
        let s = Matrix2::new(va, cov, cov, vb);
        let want = (g.transpose() * s * g)[(0, 0)].max(0.0).sqrt();
        let got = sobel_se(a, b, va, vb, cov).unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want));
    }

    #[test]
    fn pooling_is_the_componentwise_mean(vals in proptest::collection::vec(proptest::array::uniform8(-1e3f64..1e3), 1..50)) {
        let fits: Vec<ThetaVector> = vals.iter().map(|v| ThetaVector::from_array(*v, false)).collect();
        let pooled = pool_point_estimates(&fits).unwrap().to_array();
        for p in 0..8 {
            let mean = vals.iter().map(|v| v[p]).sum::<f64>() / vals.len() as f64;
            prop_assert!((pooled[p] - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
        }
    }
}
