use std::collections::BTreeMap;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Rows sharing one observed/missing configuration.
#[derive(Debug, Clone)]
pub(crate) struct PatternGroup {
    pub obs: Vec<usize>,
    pub mis: Vec<usize>,
    pub rows: Vec<usize>,
}

/// Row-major matrix of the role-bound variables, grouped by missingness
/// pattern. Missing cells hold NaN.
#[derive(Debug, Clone)]
pub(crate) struct Incomplete {
    n: usize,
    d: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
    names: Vec<String>,
    groups: Vec<PatternGroup>,
}

impl Incomplete {
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let cols: Vec<_> = ds.bound_columns().collect();
        let (n, d) = (ds.n_rows(), cols.len());
        let mut values = vec![f64::NAN; n * d];
        let mut missing = vec![false; n * d];
        for (j, c) in cols.iter().enumerate() {
            for i in 0..n {
                missing[i * d + j] = c.missing[i];
                if !c.missing[i] {
                    values[i * d + j] = c.values[i];
                }
            }
        }
        let names = cols.iter().map(|c| c.name.clone()).collect();
        Self::build(n, d, values, missing, names)
    }

    fn build(n: usize, d: usize, values: Vec<f64>, missing: Vec<bool>, names: Vec<String>) -> Result<Self> {
        if d > 64 {
            return Err(Error::InvalidDataset("at most 64 role-bound variables are supported".into()));
        }
        for j in 0..d {
            if (0..n).filter(|&i| !missing[i * d + j]).count() < 2 {
                return Err(Error::AllMissingColumn(names[j].clone()));
            }
        }
        let mut by_mask: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let mask = (0..d).filter(|&j| missing[i * d + j]).fold(0u64, |m, j| m | (1 << j));
            if mask.count_ones() as usize == d {
                return Err(Error::RowAllMissing(i + 1));
            }
            by_mask.entry(mask).or_default().push(i);
        }
        let groups = by_mask
            .into_iter()
            .map(|(mask, rows)| PatternGroup {
                obs: (0..d).filter(|&j| mask & (1 << j) == 0).collect(),
                mis: (0..d).filter(|&j| mask & (1 << j) != 0).collect(),
                rows,
            })
            .collect();
        Ok(Self { n, d, values, missing, names, groups })
    }

    /// Rows `indices` with repetition, regrouped.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let d = self.d;
        let mut values = Vec::with_capacity(indices.len() * d);
        let mut missing = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            values.extend_from_slice(&self.values[i * d..(i + 1) * d]);
            missing.extend_from_slice(&self.missing[i * d..(i + 1) * d]);
        }
        Self::build(indices.len(), d, values, missing, self.names.clone())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn groups(&self) -> &[PatternGroup] {
        &self.groups
    }

    pub fn n_missing(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// Mean of the observed cells of each variable.
    pub fn observed_means(&self) -> Vec<f64> {
        (0..self.d)
            .map(|j| {
                let (s, c) = (0..self.n)
                    .filter(|&i| !self.missing[i * self.d + j])
                    .fold((0.0, 0usize), |(s, c), i| (s + self.values[i * self.d + j], c + 1));
                s / c as f64
            })
            .collect()
    }

    /// Observed-cell variance of each variable (denominator = count).
    pub fn observed_variances(&self, means: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|j| {
                let (s, c) = (0..self.n).filter(|&i| !self.missing[i * self.d + j]).fold((0.0, 0usize), |(s, c), i| {
                    let dv = self.values[i * self.d + j] - means[j];
                    (s + dv * dv, c + 1)
                });
                s / c as f64
            })
            .collect()
    }
}
