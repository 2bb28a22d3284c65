//! Complete-data estimation of the single-mediator model
//!
//! ```text
//! M = iM + a·X + eM
//! Y = iY + b·M + c′·X + eY
//! ```
//!
//! from the sample moments of (X, M, Y).

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Relative threshold on `s²X·s²M − s²XM` below which the design is singular.
const SINGULAR_REL_TOL: f64 = 1e-12;

/// The eight reported quantities, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    #[serde(rename = "iM")]
    IM,
    #[serde(rename = "iY")]
    IY,
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "c'")]
    CPrime,
    #[serde(rename = "var_eM")]
    VarEM,
    #[serde(rename = "var_eY")]
    VarEY,
    #[serde(rename = "ab")]
    AB,
}

impl Param {
    /// Canonical order, matching [`ThetaVector::to_array`].
    pub const ALL: [Param; 8] =
        [Param::IM, Param::IY, Param::A, Param::B, Param::CPrime, Param::VarEM, Param::VarEY, Param::AB];

    /// Row order used in printed reports.
    pub const REPORT_ORDER: [Param; 8] =
        [Param::A, Param::B, Param::CPrime, Param::AB, Param::IY, Param::IM, Param::VarEY, Param::VarEM];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::IM => "iM",
            Param::IY => "iY",
            Param::A => "a",
            Param::B => "b",
            Param::CPrime => "c'",
            Param::VarEM => "var_eM",
            Param::VarEY => "var_eY",
            Param::AB => "ab",
        }
    }
}

impl std::fmt::Display for Param {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameter estimates of the mediation model plus the mediation effect.
///
/// For a single fit `ab == a * b`. A pooled vector (see
/// [`pool_point_estimates`]) carries the mean of the per-fit products instead,
/// and has `pooled` set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaVector {
    pub i_m: f64,
    pub i_y: f64,
    pub a: f64,
    pub b: f64,
    pub c_prime: f64,
    pub var_e_m: f64,
    pub var_e_y: f64,
    pub ab: f64,
    #[serde(default)]
    pub pooled: bool,
}

impl ThetaVector {
    pub fn to_array(&self) -> [f64; 8] {
        [self.i_m, self.i_y, self.a, self.b, self.c_prime, self.var_e_m, self.var_e_y, self.ab]
    }

    pub fn from_array(v: [f64; 8], pooled: bool) -> Self {
        Self { i_m: v[0], i_y: v[1], a: v[2], b: v[3], c_prime: v[4], var_e_m: v[5], var_e_y: v[6], ab: v[7], pooled }
    }

    pub fn get(&self, p: Param) -> f64 {
        self.to_array()[p.index()]
    }
}

/// Means, variances and covariances of X, M, Y (denominator n − 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub n: usize,
    pub mean_x: f64,
    pub mean_m: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_m: f64,
    pub var_y: f64,
    pub cov_xm: f64,
    pub cov_my: f64,
    pub cov_xy: f64,
}

impl SampleMoments {
    pub fn from_columns(x: &[f64], m: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let nf = n as f64;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / nf;
        let (mean_x, mean_m, mean_y) = (mean(x), mean(m), mean(y));
        let (mut sxx, mut smm, mut syy, mut sxm, mut smy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let (dx, dm, dy) = (x[i] - mean_x, m[i] - mean_m, y[i] - mean_y);
            sxx += dx * dx;
            smm += dm * dm;
            syy += dy * dy;
            sxm += dx * dm;
            smy += dm * dy;
            sxy += dx * dy;
        }
        let d = nf - 1.0;
        Self {
            n,
            mean_x,
            mean_m,
            mean_y,
            var_x: sxx / d,
            var_m: smm / d,
            var_y: syy / d,
            cov_xm: sxm / d,
            cov_my: smy / d,
            cov_xy: sxy / d,
        }
    }
}

/// Fits both regressions on a dataset whose X, M and Y are fully observed.
pub fn fit_complete(ds: &Dataset) -> Result<ThetaVector> {
    let (x, m, y) = (ds.x(), ds.m(), ds.y());
    if x.n_missing() + m.n_missing() + y.n_missing() > 0 {
        return Err(Error::MaskedCells);
    }
    fit_columns(&x.values, &m.values, &y.values)
}

/// [`fit_complete`] on raw, equally long columns.
pub fn fit_columns(x: &[f64], m: &[f64], y: &[f64]) -> Result<ThetaVector> {
    let n = x.len();
    if n < 4 {
        return Err(Error::TooFewRows { needed: 4, got: n });
    }
    debug_assert!(m.len() == n && y.len() == n);
    let mo = SampleMoments::from_columns(x, m, y);

    let raw_x2 = x.iter().map(|v| v * v).sum::<f64>() / (n as f64 - 1.0);
    if !(mo.var_x > 1e-14 * raw_x2) {
        return Err(Error::SingularDesign("X has zero variance"));
    }
    let denom = mo.var_x * mo.var_m - mo.cov_xm * mo.cov_xm;
    if !(denom > SINGULAR_REL_TOL * mo.var_x * mo.var_m) {
        return Err(Error::SingularDesign("X and M are collinear"));
    }

    let a = mo.cov_xm / mo.var_x;
    let b = (mo.cov_my * mo.var_x - mo.cov_xm * mo.cov_xy) / denom;
    let c_prime = (mo.cov_xy * mo.var_m - mo.cov_xm * mo.cov_my) / denom;
    let i_m = mo.mean_m - a * mo.mean_x;
    let i_y = mo.mean_y - b * mo.mean_m - c_prime * mo.mean_x;

    let (mut sse_m, mut sse_y) = (0.0, 0.0);
    for i in 0..n {
        let (dx, dm, dy) = (x[i] - mo.mean_x, m[i] - mo.mean_m, y[i] - mo.mean_y);
        let rm = dm - a * dx;
        let ry = dy - b * dm - c_prime * dx;
        sse_m += rm * rm;
        sse_y += ry * ry;
    }

    Ok(ThetaVector {
        i_m,
        i_y,
        a,
        b,
        c_prime,
        var_e_m: sse_m / (n as f64 - 2.0),
        var_e_y: sse_y / (n as f64 - 3.0),
        ab: a * b,
        pooled: false,
    })
}

/// Delta-method (Sobel) standard error of `a·b`.
pub fn sobel_se(a: f64, b: f64, var_a: f64, var_b: f64, cov_ab: f64) -> Result<f64> {
    if var_a < 0.0 {
        return Err(Error::NegativeOperand(var_a));
    }
    if var_b < 0.0 {
        return Err(Error::NegativeOperand(var_b));
    }
    let radicand = b * b * var_a + 2.0 * a * b * cov_ab + a * a * var_b;
    if radicand < 0.0 {
        return Err(Error::NegativeOperand(radicand));
    }
    Ok(radicand.sqrt())
}

/// Component-wise mean of `K` fits. `ab` is the mean of the per-fit products.
pub fn pool_point_estimates(fits: &[ThetaVector]) -> Result<ThetaVector> {
    let first = fits.first().ok_or(Error::EmptyInput)?.to_array();
    let mut acc = [0.0; 8];
    for f in fits {
        for (s, (v, f0)) in acc.iter_mut().zip(f.to_array().iter().zip(&first)) {
            *s += v - f0;
        }
    }
    let k = fits.len() as f64;
    let mut out = first;
    for (o, s) in out.iter_mut().zip(acc) {
        *o += s / k;
    }
    Ok(ThetaVector::from_array(out, true))
}

/// Running mean over fits, same arithmetic as [`pool_point_estimates`]
/// without materialising the list.
#[derive(Debug, Clone, Default)]
pub(crate) struct Pool {
    first: Option<[f64; 8]>,
    acc: [f64; 8],
    k: usize,
}

impl Pool {
    pub fn push(&mut self, fit: &ThetaVector) {
        let v = fit.to_array();
        let first = *self.first.get_or_insert(v);
        for ((s, x), f0) in self.acc.iter_mut().zip(v).zip(first) {
            *s += x - f0;
        }
        self.k += 1;
    }

    pub fn finish(&self) -> Result<ThetaVector> {
        let mut out = self.first.ok_or(Error::EmptyInput)?;
        let k = self.k as f64;
        for (o, s) in out.iter_mut().zip(self.acc) {
            *o += s / k;
        }
        Ok(ThetaVector::from_array(out, true))
    }
}
