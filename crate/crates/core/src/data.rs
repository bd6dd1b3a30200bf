//! Observed-data model for a completely randomized experiment with
//! non-compliance, CSV ingestion and the basic arm-wise moments every
//! estimator is built from.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use crate::error::{CaceError, Result};

const BINARY_TOL: f64 = 1e-9;

/// Which CSV columns besides `z`, `w`, `y` are used as covariates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum CovariateSelection {
    /// Every remaining column whose cells are all numeric.
    #[default]
    All,
    None,
    Named(Vec<String>),
}

/// Observed `(Z, W, Y, x)` for `n` units.
///
/// Covariates are stored column-wise and are centered at construction so the
/// full-sample mean of every column is zero. The pre-centering means are kept
/// for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    z: Vec<u8>,
    w: Vec<u8>,
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    covariate_names: Vec<String>,
    covariate_means: Vec<f64>,
    n1: usize,
}

impl ExperimentData {
    /// Validates the observations and centers the covariate columns.
    pub fn new(
        z: Vec<u8>,
        w: Vec<u8>,
        y: Vec<f64>,
        covariates: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        let n = z.len();
        for len in [w.len(), y.len()] {
            if len != n {
                return Err(CaceError::LengthMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        if n < 4 {
            return Err(CaceError::DegenerateArm(format!("n = {n} < 4")));
        }
        for (name, col) in [("z", &z), ("w", &w)] {
            if let Some(row) = col.iter().position(|&v| v > 1) {
                return Err(CaceError::NonBinary {
                    column: name.to_string(),
                    row,
                    value: col[row].to_string(),
                });
            }
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(CaceError::NonFinite {
                column: "y".into(),
                row,
            });
        }
        let n1 = z.iter().filter(|&&v| v == 1).count();
        let n0 = n - n1;
        if n1 < 2 {
            return Err(CaceError::DegenerateArm(format!("n1 < 2 (n1 = {n1})")));
        }
        if n0 < 2 {
            return Err(CaceError::DegenerateArm(format!("n0 < 2 (n0 = {n0})")));
        }

        let mut names = Vec::with_capacity(covariates.len());
        let mut means = Vec::with_capacity(covariates.len());
        let mut x = Vec::with_capacity(covariates.len());
        for (name, mut col) in covariates {
            if col.len() != n {
                return Err(CaceError::LengthMismatch {
                    expected: n,
                    actual: col.len(),
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(CaceError::NonFinite { column: name, row });
            }
            let m = mean(&col);
            for v in &mut col {
                *v -= m;
            }
            names.push(name);
            means.push(m);
            x.push(col);
        }

        Ok(Self {
            z,
            w,
            y,
            x,
            covariate_names: names,
            covariate_means: means,
            n1,
        })
    }

    /// Reads and validates a CSV file. See [`ExperimentData::from_csv_reader`].
    pub fn load_csv(path: impl AsRef<Path>, selection: &CovariateSelection) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, selection)
    }

    /// Parses a headered CSV with required columns `z`, `w`, `y`.
    ///
    /// Rows with a missing cell are rejected rather than dropped.
    pub fn from_csv_reader<R: Read>(reader: R, selection: &CovariateSelection) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for record in rdr.records() {
            let record = record?;
            for (j, col) in cells.iter_mut().enumerate() {
                col.push(record.get(j).unwrap_or("").to_string());
            }
        }

        let find = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CaceError::MissingColumn(name.to_string()))
        };
        let (zi, wi, yi) = (find("z")?, find("w")?, find("y")?);

        let z = parse_binary("z", &cells[zi])?;
        let w = parse_binary("w", &cells[wi])?;
        let y = parse_real("y", &cells[yi])?;

        let mut covariates = Vec::new();
        match selection {
            CovariateSelection::None => {}
            CovariateSelection::All => {
                for (j, name) in headers.iter().enumerate() {
                    if j == zi || j == wi || j == yi {
                        continue;
                    }
                    // Columns with any non-numeric, non-empty cell are not covariates.
                    let numeric = cells[j]
                        .iter()
                        .all(|c| is_missing(c) || c.parse::<f64>().is_ok());
                    if numeric {
                        covariates.push((name.clone(), parse_real(name, &cells[j])?));
                    }
                }
            }
            CovariateSelection::Named(wanted) => {
                let mut seen = HashSet::new();
                for name in wanted {
                    if !seen.insert(name.as_str()) {
                        continue;
                    }
                    let j = headers
                        .iter()
                        .position(|h| h == name)
                        .ok_or_else(|| CaceError::UnknownCovariate(name.clone()))?;
                    if j == zi || j == wi || j == yi {
                        return Err(CaceError::UnknownCovariate(name.clone()));
                    }
                    covariates.push((name.clone(), parse_real(name, &cells[j])?));
                }
            }
        }

        Self::new(z, w, y, covariates)
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n0(&self) -> usize {
        self.z.len() - self.n1
    }

    /// Number of covariates `K`.
    pub fn k(&self) -> usize {
        self.x.len()
    }

    pub fn z(&self) -> &[u8] {
        &self.z
    }

    pub fn w(&self) -> &[u8] {
        &self.w
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Centered covariate columns.
    pub fn covariates(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Column means before centering.
    pub fn covariate_means(&self) -> &[f64] {
        &self.covariate_means
    }

    /// `W` as reals.
    pub fn w_real(&self) -> Vec<f64> {
        self.w.iter().map(|&v| f64::from(v)).collect()
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na")
}

fn parse_real(column: &str, cells: &[String]) -> Result<Vec<f64>> {
    cells
        .iter()
        .enumerate()
        .map(|(row, c)| {
            if is_missing(c) {
                return Err(CaceError::MissingValue {
                    column: column.to_string(),
                    row,
                });
            }
            let v: f64 = c.parse().map_err(|_| CaceError::NonNumeric {
                column: column.to_string(),
                row,
                value: c.clone(),
            })?;
            if !v.is_finite() {
                return Err(CaceError::NonFinite {
                    column: column.to_string(),
                    row,
                });
            }
            Ok(v)
        })
        .collect()
}

fn parse_binary(column: &str, cells: &[String]) -> Result<Vec<u8>> {
    let reals = parse_real(column, cells)?;
    reals
        .iter()
        .enumerate()
        .map(|(row, &v)| {
            if (v - 0.0).abs() <= BINARY_TOL {
                Ok(0)
            } else if (v - 1.0).abs() <= BINARY_TOL {
                Ok(1)
            } else {
                Err(CaceError::NonBinary {
                    column: column.to_string(),
                    row,
                    value: cells[row].clone(),
                })
            }
        })
        .collect()
}

pub(crate) fn mean(q: &[f64]) -> f64 {
    q.iter().sum::<f64>() / q.len() as f64
}

/// Mean of `q` over treated units minus mean over control units.
pub fn difference_in_means(q: &[f64], z: &[u8]) -> Result<f64> {
    if q.len() != z.len() {
        return Err(CaceError::LengthMismatch {
            expected: z.len(),
            actual: q.len(),
        });
    }
    let (mut s1, mut s0, mut n1, mut n0) = (0.0, 0.0, 0usize, 0usize);
    for (&v, &zi) in q.iter().zip(z) {
        if zi == 1 {
            s1 += v;
            n1 += 1;
        } else {
            s0 += v;
            n0 += 1;
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(CaceError::DegenerateArm("empty assignment arm".into()));
    }
    Ok(s1 / n1 as f64 - s0 / n0 as f64)
}

/// Unbiased (divisor `len - 1`) variance.
pub fn sample_variance(q: &[f64]) -> Result<f64> {
    sample_covariance(q, q)
}

/// Unbiased (divisor `len - 1`) covariance.
pub fn sample_covariance(q: &[f64], r: &[f64]) -> Result<f64> {
    if q.len() != r.len() {
        return Err(CaceError::LengthMismatch {
            expected: q.len(),
            actual: r.len(),
        });
    }
    if q.len() < 2 {
        return Err(CaceError::DegenerateArm(format!(
            "variance needs at least 2 values, got {}",
            q.len()
        )));
    }
    let (mq, mr) = (mean(q), mean(r));
    let s: f64 = q.iter().zip(r).map(|(a, b)| (a - mq) * (b - mr)).sum();
    Ok(s / (q.len() - 1) as f64)
}

/// Values of `q` for units in `arm`.
pub(crate) fn arm_values(q: &[f64], z: &[u8], arm: u8) -> Vec<f64> {
    q.iter()
        .zip(z)
        .filter(|(_, &zi)| zi == arm)
        .map(|(&v, _)| v)
        .collect()
}
