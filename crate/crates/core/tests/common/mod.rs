use statrs::distribution::{ContinuousCDF, Normal};

/// Brute-force BC interval written directly from the formulas.
pub fn bc_oracle(est: &[f64], point: f64, level: f64) -> (f64, f64) {
    let b = est.len();
    let mut below = 0usize;
    for &e in est {
        if e < point {
            below += 1;
        }
    }
    let mut p = below as f64 / b as f64;
    let lo_clamp = 1.0 / (2.0 * b as f64);
    if p < lo_clamp {
        p = lo_clamp;
    }
    if p > 1.0 - lo_clamp {
        p = 1.0 - lo_clamp;
    }
    let nd = Normal::new(0.0, 1.0).unwrap();
    let z0 = nd.inverse_cdf(p);
    let alpha = (1.0 - level) / 2.0;
    let a1 = nd.cdf(2.0 * z0 + nd.inverse_cdf(alpha));
    let a2 = nd.cdf(2.0 * z0 + nd.inverse_cdf(1.0 - alpha));
    let pick = |a: f64| {
        let mut k = (a * (b as f64 + 1.0)).trunc() as i64;
        if k < 1 {
            k = 1;
        }
        if k > b as i64 {
            k = b as i64;
        }
        // k-th smallest (1-based) by selection
        let mut v = est.to_vec();
        let (_, kth, _) = v.select_nth_unstable_by(k as usize - 1, |x, y| x.partial_cmp(y).unwrap());
        *kth
    };
    (pick(a1), pick(a2))
}
