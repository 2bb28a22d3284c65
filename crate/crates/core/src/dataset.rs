//! Rectangular numeric data with a per-cell missingness mask.
//!
//! Values under a `true` mask entry are never read by any computation in this
//! crate; only the mask decides what is missing.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role of a column in the mediation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    X,
    M,
    Y,
    /// Auxiliary variable, numbered from zero in declaration order.
    Aux(usize),
    Ignored,
}

/// Names of the columns bound to each role.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoleSpec {
    pub x: String,
    pub m: String,
    pub y: String,
    pub aux: Vec<String>,
}

impl RoleSpec {
    pub fn new(x: impl Into<String>, m: impl Into<String>, y: impl Into<String>) -> Self {
        Self { x: x.into(), m: m.into(), y: y.into(), aux: Vec::new() }
    }

    pub fn with_aux<I, S>(mut self, aux: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.aux = aux.into_iter().map(Into::into).collect();
        self
    }

    fn assignments(&self) -> impl Iterator<Item = (&str, Role)> {
        [(self.x.as_str(), Role::X), (self.m.as_str(), Role::M), (self.y.as_str(), Role::Y)]
            .into_iter()
            .chain(self.aux.iter().enumerate().map(|(i, n)| (n.as_str(), Role::Aux(i))))
    }
}

/// How missing cells are encoded in a delimited file. Empty fields always
/// count as missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MissingCode {
    Blank,
    Code(f64),
}

impl MissingCode {
    fn is_missing(&self, field: &str) -> bool {
        let field = field.trim();
        if field.is_empty() {
            return true;
        }
        match self {
            MissingCode::Blank => false,
            MissingCode::Code(code) => field.parse::<f64>().map(|v| v == *code).unwrap_or(false),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
    /// `true` marks a missing cell.
    pub missing: Vec<bool>,
}

impl Column {
    pub fn complete(name: impl Into<String>, values: Vec<f64>) -> Self {
        let missing = vec![false; values.len()];
        Self { name: name.into(), values, missing }
    }

    pub fn n_missing(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }
}

/// Masked cells compare equal whatever they hold.
impl PartialEq for Column {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.missing == other.missing
            && self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).zip(&self.missing).all(|((a, b), &m)| m || a == b)
    }
}

/// An immutable table of named numeric columns with role assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_rows: usize,
    columns: Vec<Column>,
    roles: Vec<Role>,
    /// Column indices in role order: X, M, Y, AUX₀, AUX₁, ...
    bound: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset and binds roles by column name. Columns not named in
    /// `spec` get [`Role::Ignored`].
    pub fn new(columns: Vec<Column>, spec: &RoleSpec) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |c| c.values.len());
        for c in &columns {
            if c.values.len() != n_rows || c.missing.len() != n_rows {
                return Err(Error::InvalidDataset(format!(
                    "column `{}` does not have {n_rows} rows in both values and mask",
                    c.name
                )));
            }
            if let Some(i) = (0..n_rows).find(|&i| !c.missing[i] && !c.values[i].is_finite()) {
                return Err(Error::UnparseableCell {
                    row: i + 1,
                    column: c.name.clone(),
                    value: c.values[i].to_string(),
                });
            }
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::InvalidDataset(format!("duplicate column name `{}`", c.name)));
            }
        }

        let mut roles = vec![Role::Ignored; columns.len()];
        let mut assigned: Vec<(Role, usize)> = Vec::new();
        for (name, role) in spec.assignments() {
            let idx =
                columns.iter().position(|c| c.name == name).ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
            if roles[idx] != Role::Ignored {
                return Err(Error::DuplicateRole(name.to_string()));
            }
            roles[idx] = role;
            assigned.push((role, idx));
        }
        assigned.sort();
        let bound = assigned.into_iter().map(|(_, idx)| idx).collect();

        Ok(Self { n_rows, columns, roles, bound })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn n_aux(&self) -> usize {
        self.bound.len() - 3
    }

    /// Role-bound columns in role order (X, M, Y, AUX...).
    pub fn bound_columns(&self) -> impl Iterator<Item = &Column> + '_ {
        self.bound.iter().map(move |&i| &self.columns[i])
    }

    pub fn column(&self, role: Role) -> Option<&Column> {
        self.roles.iter().position(|&r| r == role).map(|i| &self.columns[i])
    }

    pub fn x(&self) -> &Column {
        &self.columns[self.bound[0]]
    }

    pub fn m(&self) -> &Column {
        &self.columns[self.bound[1]]
    }

    pub fn y(&self) -> &Column {
        &self.columns[self.bound[2]]
    }

    pub fn n_missing(&self) -> usize {
        self.bound_columns().map(Column::n_missing).sum()
    }

    /// The same data with every auxiliary column demoted to [`Role::Ignored`].
    pub fn without_aux(&self) -> Dataset {
        let mut out = self.clone();
        for r in out.roles.iter_mut() {
            if matches!(r, Role::Aux(_)) {
                *r = Role::Ignored;
            }
        }
        out.bound.truncate(3);
        out
    }

    /// Rows `indices` (with repetition) in the given order, masks included.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                values: indices.iter().map(|&i| c.values[i]).collect(),
                missing: indices.iter().map(|&i| c.missing[i]).collect(),
            })
            .collect();
        Dataset { n_rows: indices.len(), columns, roles: self.roles.clone(), bound: self.bound.clone() }
    }

    /// Replaces the values and masks of the role-bound columns. `values[j]`
    /// refers to the j-th role-bound column in role order.
    pub(crate) fn with_bound_values(&self, values: Vec<Vec<f64>>, missing: Option<Vec<Vec<bool>>>) -> Dataset {
        let mut out = self.clone();
        let mut missing = missing.map(|m| m.into_iter());
        for (&idx, v) in self.bound.iter().zip(values) {
            let col = &mut out.columns[idx];
            col.missing = match missing.as_mut() {
                Some(it) => it.next().expect("mask for every bound column"),
                None => vec![false; v.len()],
            };
            col.values = v;
        }
        out
    }

    /// Writes the dataset as headered CSV in column order. Missing cells are
    /// written as `code`, or left empty for [`MissingCode::Blank`].
    pub fn write_csv<W: Write>(&self, writer: W, code: MissingCode) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for i in 0..self.n_rows {
            let row: Vec<String> = self
                .columns
                .iter()
                .map(|c| match (c.missing[i], code) {
                    (false, _) => c.values[i].to_string(),
                    (true, MissingCode::Blank) => String::new(),
                    (true, MissingCode::Code(v)) => v.to_string(),
                })
                .collect();
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Reads a comma-delimited file with a header row.
pub fn load_dataset(path: impl AsRef<Path>, roles: &RoleSpec, missing_code: MissingCode) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_dataset(file, roles, missing_code)
}

/// Like [`load_dataset`], from any reader.
pub fn read_dataset<R: std::io::Read>(reader: R, roles: &RoleSpec, missing_code: MissingCode) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let mut columns: Vec<Column> =
        header.iter().map(|name| Column { name: name.to_string(), values: Vec::new(), missing: Vec::new() }).collect();

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            if missing_code.is_missing(field) {
                col.values.push(f64::NAN);
                col.missing.push(true);
                continue;
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    col.values.push(v);
                    col.missing.push(false);
                }
                _ => {
                    return Err(Error::UnparseableCell {
                        row: row + 1,
                        column: col.name.clone(),
                        value: field.to_string(),
                    })
                }
            }
        }
    }
    Dataset::new(columns, roles)
}

/// A distinct observed/missing configuration over the role-bound variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingPattern {
    /// One flag per role-bound variable in role order; `true` = missing.
    pub missing: Vec<bool>,
    pub count: usize,
}

impl MissingPattern {
    /// `O`/`X` rendering, e.g. `OXO`.
    pub fn code(&self) -> String {
        self.missing.iter().map(|&m| if m { 'X' } else { 'O' }).collect()
    }
}

/// Counts rows per missingness pattern. Patterns are ordered by the number
/// of missing variables, then lexicographically with observed before missing.
pub fn missing_patterns(ds: &Dataset) -> Vec<MissingPattern> {
    let cols: Vec<&Column> = ds.bound_columns().collect();
    let mut counts: BTreeMap<(usize, Vec<bool>), usize> = BTreeMap::new();
    for i in 0..ds.n_rows() {
        let key: Vec<bool> = cols.iter().map(|c| c.missing[i]).collect();
        let n_miss = key.iter().filter(|&&m| m).count();
        *counts.entry((n_miss, key)).or_default() += 1;
    }
    counts.into_iter().map(|((_, missing), count)| MissingPattern { missing, count }).collect()
}
