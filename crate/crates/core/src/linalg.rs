//! Small sparse linear algebra for the Newton systems: a CSR matrix with a
//! fixed pattern, tridiagonal elimination and Jacobi-preconditioned CG.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Square CSR matrix whose sparsity pattern is fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Pattern of a P1 stiffness matrix: `(i, j)` for every pair of vertices
    /// sharing an element.
    pub fn from_elements<'a>(n: usize, elements: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for verts in elements {
            for &i in verts {
                for &j in verts {
                    rows[i].insert(j);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for r in &rows {
            cols.extend(r.iter().copied());
            row_ptr.push(cols.len());
        }
        let nnz = cols.len();
        Self {
            n,
            row_ptr,
            cols,
            vals: vec![0.0; nnz],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|p| self.row_ptr[i] + p)
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is outside the sparsity pattern"));
        self.vals[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.vals[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            *yi = acc;
        }
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for i in 0..self.n {
            for &j in &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]] {
                bw = bw.max(i.abs_diff(j));
            }
        }
        bw
    }

    /// Solves a matrix of bandwidth ≤ 1 by tridiagonal elimination.
    pub fn solve_tridiagonal(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if self.bandwidth() > 1 {
            return Err(Error::config("tridiagonal solver requested for a matrix with bandwidth > 1"));
        }
        let n = self.n;
        let lower: Vec<f64> = (0..n).map(|i| if i > 0 { self.get(i, i - 1) } else { 0.0 }).collect();
        let diag = self.diagonal();
        let upper: Vec<f64> = (0..n).map(|i| if i + 1 < n { self.get(i, i + 1) } else { 0.0 }).collect();
        solve_tridiagonal(&lower, &diag, &upper, rhs)
    }
}

/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut prev_c = 0.0;
    let mut prev_d = 0.0;
    for i in 0..n {
        let a = if i > 0 { lower[i] } else { 0.0 };
        let denom = diag[i] - a * prev_c;
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Solver {
                what: format!("tridiagonal elimination broke down at row {i}"),
                residual: f64::INFINITY,
            });
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - a * prev_d) / denom;
        prev_c = c[i];
        prev_d = d[i];
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Outcome of a CG solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`.
///
/// Stops when `‖b - Ax‖ ≤ tol·‖b‖`.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iters: usize) -> Result<(Vec<f64>, CgStats)> {
    let n = a.dim();
    let dinv: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = math::sqrt(b.iter().map(|v| v * v).sum());
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            CgStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 1..=max_iters {
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Solver {
                what: format!("conjugate gradient breakdown (pᵀAp = {pap:e}) at iteration {it}"),
                residual: math::sqrt(r.iter().map(|v| v * v).sum()) / bnorm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = math::sqrt(r.iter().map(|v| v * v).sum()) / bnorm;
        if rel <= tol {
            return Ok((
                x,
                CgStats {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver {
        what: format!("conjugate gradient did not converge in {max_iters} iterations"),
        residual: math::sqrt(r.iter().map(|v| v * v).sum()) / bnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> CsrMatrix {
        let elems: Vec<[usize; 2]> = (0..n - 1).map(|i| [i, i + 1]).collect();
        let mut a = CsrMatrix::from_elements(n, elems.iter().map(|e| &e[..]));
        for e in &elems {
            a.add(e[0], e[0], 1.0 + shift);
            a.add(e[1], e[1], 1.0 + shift);
            a.add(e[0], e[1], -1.0);
            a.add(e[1], e[0], -1.0);
        }
        a
    }

    #[test]
    fn tridiagonal_matches_dense_solution() {
        let a = laplace_1d(6, 0.5);
        let x_true = [1.0, -2.0, 0.5, 3.0, 0.0, -1.0];
        let mut b = vec![0.0; 6];
        a.matvec(&x_true, &mut b);
        let x = a.solve_tridiagonal(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn pcg_matches_tridiagonal() {
        let a = laplace_1d(30, 0.1);
        let b: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let x1 = a.solve_tridiagonal(&b).unwrap();
        let (x2, stats) = pcg(&a, &b, 1e-14, 200).unwrap();
        assert!(stats.iterations <= 30);
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_systems_fail() {
        assert!(solve_tridiagonal(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]).is_err());
        let mut a = CsrMatrix::from_elements(2, [&[0usize, 1][..]]);
        a.add(0, 0, -1.0);
        a.add(1, 1, -1.0);
        assert!(pcg(&a, &[1.0, 1.0], 1e-12, 10).is_err());
    }
}
