//! Sparse symmetric linear algebra: CSR storage, Jacobi-preconditioned
//! conjugate gradients, and a Thomas solver for the tridiagonal systems the
//! one-dimensional discretization produces.
//!
//! Dot products reduce in a fixed sequential order so repeated solves are
//! bitwise reproducible.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row column maps (sorted by construction).
    pub fn from_row_maps(rows: Vec<BTreeMap<usize, f64>>, n_cols: usize) -> Self {
        let n_rows = rows.len();
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let mut acc = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[idx] * x[self.col_idx[idx]];
            }
            y[i] = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows];
        for i in 0..self.n_rows {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[idx] == i {
                    d[i] = self.values[idx];
                }
            }
        }
        d
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// `sum_i coeff_i * A_i` over matrices sharing one sparsity pattern.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        assert!(!terms.is_empty());
        let first = terms[0].1;
        for (_, m) in terms.iter().skip(1) {
            assert!(first.same_pattern(m), "pattern mismatch in combination");
        }
        let mut out = first.clone();
        for v in out.values.iter_mut() {
            *v = 0.0;
        }
        for (c, m) in terms {
            for (o, v) in out.values.iter_mut().zip(&m.values) {
                *o += c * v;
            }
        }
        out
    }

    /// `self + c * diag(d)`; every diagonal position must be structurally
    /// present (true for the assembled operators).
    pub fn add_scaled_diagonal(&self, diag: &[f64], c: f64) -> CsrMatrix {
        assert_eq!(diag.len(), self.n_rows);
        let mut out = self.clone();
        for i in 0..out.n_rows {
            let mut hit = false;
            for idx in out.row_ptr[i]..out.row_ptr[i + 1] {
                if out.col_idx[idx] == i {
                    out.values[idx] += c * diag[i];
                    hit = true;
                    break;
                }
            }
            assert!(hit, "row {i} has no diagonal entry");
        }
        out
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`; 0 for exactly
    /// symmetric matrices. Test helper for assembled operators.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[idx];
                let a_ij = self.values[idx];
                let a_ji = self.get(j, i);
                worst = worst.max((a_ij - a_ji).abs() / scale);
            }
        }
        worst
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[idx] == j {
                return self.values[idx];
            }
        }
        0.0
    }

    /// Extract the three bands if no entry falls outside them.
    pub fn to_tridiagonal(&self) -> Option<TriDiag> {
        let n = self.n_rows;
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for i in 0..n {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[idx];
                let v = self.values[idx];
                if j + 1 == i {
                    sub[i] = v;
                } else if j == i {
                    diag[i] = v;
                } else if j == i + 1 {
                    sup[i] = v;
                } else if v != 0.0 {
                    return None;
                }
            }
        }
        Some(TriDiag { sub, diag, sup })
    }
}

/// Tridiagonal view: `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = b[i]`.
#[derive(Debug, Clone)]
pub struct TriDiag {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

/// Thomas algorithm. Stable for the SPD systems assembled here.
pub fn tri_solve(t: &TriDiag, b: &[f64]) -> Result<Vec<f64>> {
    let n = t.diag.len();
    assert_eq!(b.len(), n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    if t.diag[0] == 0.0 {
        return Err(Error::ZeroPivot { row: 0 });
    }
    c[0] = t.sup[0] / t.diag[0];
    d[0] = b[0] / t.diag[0];
    for i in 1..n {
        let denom = t.diag[i] - t.sub[i] * c[i - 1];
        if denom == 0.0 {
            return Err(Error::ZeroPivot { row: i });
        }
        c[i] = t.sup[i] / denom;
        d[i] = (b[i] - t.sub[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
}

/// Conjugate gradient controls. `max_iters = None` resolves to
/// `10 sqrt(n) + 100`.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub max_iters: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-11,
            max_iters: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl SolverConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        SolverConfig {
            rel_tol,
            ..SolverConfig::default()
        }
    }

    fn iter_budget(&self, n: usize) -> usize {
        self.max_iters
            .unwrap_or_else(|| 10 * (n as f64).sqrt().ceil() as usize + 100)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Preconditioned conjugate gradients for SPD `A`.
///
/// Stops when the Euclidean residual satisfies `||b - A x|| <= rel_tol ||b||`
/// and returns the iteration count alongside the solution.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, usize)> {
    let n = a.n_rows;
    assert_eq!(b.len(), n);
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let inv_diag: Option<Vec<f64>> = match cfg.preconditioner {
        Preconditioner::Jacobi => Some(a.diagonal().iter().map(|d| 1.0 / d).collect()),
        Preconditioner::None => None,
    };
    let apply_prec = |r: &[f64]| -> Vec<f64> {
        match &inv_diag {
            Some(m) => r.iter().zip(m).map(|(ri, mi)| ri * mi).collect(),
            None => r.to_vec(),
        }
    };

    let target = cfg.rel_tol * b_norm;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut r_norm = b_norm;
    if r_norm <= target {
        return Ok((x, 0));
    }
    let mut z = apply_prec(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let budget = cfg.iter_budget(n);
    for iter in 1..=budget {
        a.matvec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        r_norm = dot(&r, &r).sqrt();
        if r_norm <= target {
            return Ok((x, iter));
        }
        z = apply_prec(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverStalled {
        iterations: budget,
        residual: r_norm / b_norm,
        target: cfg.rel_tol,
    })
}
