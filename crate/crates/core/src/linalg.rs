//! Dense least squares via Householder QR with column pivoting.
//!
//! Leverages come from row norms of the thin orthogonal factor, so the
//! `n x n` hat matrix is never formed.

use crate::error::{CaceError, Result};

/// Pivot ratio `|r_kk| / |r_00|` below which the design is declared rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Column-major design matrix with one tag per column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    columns: Vec<Vec<f64>>,
    tags: Vec<String>,
}

impl DesignMatrix {
    pub fn new(rows: usize) -> Self {
        Self {
            rows,
            columns: Vec::new(),
            tags: Vec::new(),
        }
    }

    pub fn push(&mut self, tag: impl Into<String>, column: Vec<f64>) -> Result<()> {
        if column.len() != self.rows {
            return Err(CaceError::LengthMismatch {
                expected: self.rows,
                actual: column.len(),
            });
        }
        self.tags.push(tag.into());
        self.columns.push(column);
        Ok(())
    }

    pub fn with_intercept(rows: usize) -> Self {
        let mut d = Self::new(rows);
        d.tags.push("intercept".into());
        d.columns.push(vec![1.0; rows]);
        d
    }

    /// `[1, z, x_1..x_K, z*x_1..z*x_K]`.
    pub fn interacted(z: &[u8], x: &[Vec<f64>], names: &[String]) -> Result<Self> {
        let n = z.len();
        let zf: Vec<f64> = z.iter().map(|&v| f64::from(v)).collect();
        let mut d = Self::with_intercept(n);
        d.push("z", zf.clone())?;
        for (col, name) in x.iter().zip(names) {
            d.push(name.clone(), col.clone())?;
        }
        for (col, name) in x.iter().zip(names) {
            let inter = col.iter().zip(&zf).map(|(a, b)| a * b).collect();
            d.push(format!("z*{name}"), inter)?;
        }
        Ok(d)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    /// Keeps only the rows where `keep` is true.
    pub fn select_rows(&self, keep: &[bool]) -> Self {
        let columns: Vec<Vec<f64>> = self
            .columns
            .iter()
            .map(|c| {
                c.iter()
                    .zip(keep)
                    .filter(|(_, &k)| k)
                    .map(|(&v, _)| v)
                    .collect()
            })
            .collect();
        Self {
            rows: keep.iter().filter(|&&k| k).count(),
            columns,
            tags: self.tags.clone(),
        }
    }
}

/// Thin pivoted QR factorization `A P = Q R` of a full-rank design.
#[derive(Debug, Clone)]
pub struct QrFactor {
    rows: usize,
    /// Columns of the thin `Q`, in pivot order.
    q: Vec<Vec<f64>>,
    /// Upper triangular `R`, row-major `p x p`.
    r: Vec<Vec<f64>>,
    /// `perm[k]` is the original index of the k-th pivoted column.
    perm: Vec<usize>,
    tags: Vec<String>,
}

impl QrFactor {
    pub fn new(design: &DesignMatrix) -> Result<Self> {
        let (n, p) = (design.rows(), design.cols());
        if n < p || p == 0 {
            return Err(CaceError::Underdetermined { rows: n, cols: p });
        }
        let mut a: Vec<Vec<f64>> = design.columns.clone();
        let mut perm: Vec<usize> = (0..p).collect();
        let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(p);
        let mut first_pivot = 0.0_f64;

        for k in 0..p {
            // Pick the remaining column with the largest trailing norm.
            let mut best = k;
            let mut best_norm = -1.0;
            for (j, col) in a.iter().enumerate().skip(k) {
                let s: f64 = col[k..].iter().map(|v| v * v).sum();
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            a.swap(k, best);
            perm.swap(k, best);

            let norm = best_norm.sqrt();
            if k == 0 {
                first_pivot = norm;
            }
            if first_pivot == 0.0 || norm / first_pivot < RANK_TOL {
                return Err(CaceError::RankDeficient {
                    column: design.tags[perm[k]].clone(),
                });
            }

            // Householder vector v with v[0] = x0 - alpha, alpha = -sign(x0) ||x||.
            let x0 = a[k][k];
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            let mut v: Vec<f64> = a[k][k..].to_vec();
            v[0] -= alpha;
            let vnorm2: f64 = v.iter().map(|t| t * t).sum();
            if vnorm2 > 0.0 {
                for col in a.iter_mut().skip(k + 1) {
                    let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
                    let f = 2.0 * dot / vnorm2;
                    for (c, vi) in col[k..].iter_mut().zip(&v) {
                        *c -= f * vi;
                    }
                }
            }
            a[k][k] = alpha;
            for c in &mut a[k][k + 1..] {
                *c = 0.0;
            }
            reflectors.push(v);
        }

        let r: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| if j >= i { a[j][i] } else { 0.0 }).collect())
            .collect();

        // Accumulate thin Q = H_0 H_1 ... H_{p-1} [I_p; 0].
        let mut q: Vec<Vec<f64>> = (0..p)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect();
        for (k, v) in reflectors.iter().enumerate().rev() {
            let vnorm2: f64 = v.iter().map(|t| t * t).sum();
            if vnorm2 == 0.0 {
                continue;
            }
            for col in q.iter_mut() {
                let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
                let f = 2.0 * dot / vnorm2;
                for (c, vi) in col[k..].iter_mut().zip(v) {
                    *c -= f * vi;
                }
            }
        }

        Ok(Self {
            rows: n,
            q,
            r,
            perm,
            tags: design.tags.clone(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.perm.len()
    }

    fn qt(&self, y: &[f64]) -> Vec<f64> {
        self.q
            .iter()
            .map(|c| c.iter().zip(y).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Least-squares coefficients in the original column order.
    pub fn coefficients(&self, y: &[f64]) -> Vec<f64> {
        let p = self.cols();
        let rhs = self.qt(y);
        let mut gamma = vec![0.0; p];
        for i in (0..p).rev() {
            let s: f64 = (i + 1..p).map(|j| self.r[i][j] * gamma[j]).sum();
            gamma[i] = (rhs[i] - s) / self.r[i][i];
        }
        let mut beta = vec![0.0; p];
        for (k, &j) in self.perm.iter().enumerate() {
            beta[j] = gamma[k];
        }
        beta
    }

    /// `y - Q Q^T y`.
    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        let qty = self.qt(y);
        let mut res = y.to_vec();
        for (c, &t) in self.q.iter().zip(&qty) {
            for (r, qi) in res.iter_mut().zip(c) {
                *r -= t * qi;
            }
        }
        res
    }

    /// Diagonal of the hat matrix.
    pub fn leverages(&self) -> Vec<f64> {
        let mut h = vec![0.0; self.rows];
        for c in &self.q {
            for (hi, qi) in h.iter_mut().zip(c) {
                *hi += qi * qi;
            }
        }
        h
    }

    /// Row `j` of `(A^T A)^{-1} A^T`, i.e. the weights `c` with `beta_j = c . y`.
    pub fn coefficient_weights(&self, j: usize) -> Vec<f64> {
        let p = self.cols();
        let k = self
            .perm
            .iter()
            .position(|&c| c == j)
            .expect("column index in range");
        // Solve R^T v = e_k.
        let mut v = vec![0.0; p];
        for i in 0..p {
            let rhs = if i == k { 1.0 } else { 0.0 };
            let s: f64 = (0..i).map(|m| self.r[m][i] * v[m]).sum();
            v[i] = (rhs - s) / self.r[i][i];
        }
        let mut c = vec![0.0; self.rows];
        for (col, &vi) in self.q.iter().zip(&v) {
            if vi != 0.0 {
                for (ci, qi) in c.iter_mut().zip(col) {
                    *ci += vi * qi;
                }
            }
        }
        c
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }
}

/// Result of an ordinary least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// Intercept first when the design has one.
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub leverages: Vec<f64>,
    pub design_columns: Vec<String>,
}

pub fn ols(response: &[f64], design: &DesignMatrix) -> Result<OlsFit> {
    if response.len() != design.rows() {
        return Err(CaceError::LengthMismatch {
            expected: design.rows(),
            actual: response.len(),
        });
    }
    let qr = QrFactor::new(design)?;
    Ok(OlsFit {
        coefficients: qr.coefficients(response),
        residuals: qr.residuals(response),
        leverages: qr.leverages(),
        design_columns: design.tags().to_vec(),
    })
}

/// Slope on `x` of the OLS of `q` on `(1, x)` using units with `z == arm`.
pub fn groupwise_projection_slope(
    q: &[f64],
    x: &[Vec<f64>],
    z: &[u8],
    arm: u8,
) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let keep: Vec<bool> = z.iter().map(|&v| v == arm).collect();
    let rows = keep.iter().filter(|&&k| k).count();
    if rows < x.len() + 2 {
        return Err(CaceError::Underdetermined {
            rows,
            cols: x.len() + 1,
        });
    }
    let pick = |c: &[f64]| -> Vec<f64> {
        c.iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(&v, _)| v)
            .collect()
    };
    let mut d = DesignMatrix::with_intercept(rows);
    for (j, col) in x.iter().enumerate() {
        d.push(format!("x{}", j + 1), pick(col))?;
    }
    let fit = ols(&pick(q), &d)?;
    Ok(fit.coefficients[1..].to_vec())
}
