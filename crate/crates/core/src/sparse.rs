//! Compressed sparse row matrices, ILU(0) and restarted GMRES.
//!
//! Everything here is single threaded and runs in a fixed operation order, so
//! repeated solves of the same system are bitwise reproducible.

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            assert!(
                i < nrows && j < ncols,
                "triplet ({i}, {j}) outside {nrows}x{ncols}"
            );
            rows[i].push((j, v));
        }
        Self::from_rows(ncols, rows)
    }

    /// Builds a matrix from unsorted per-row entry lists; duplicates are summed.
    pub fn from_rows(ncols: usize, mut rows: Vec<Vec<(usize, T)>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let nnz_hint: usize = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz_hint);
        let mut values = Vec::with_capacity(nnz_hint);
        for row in rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    let end = values.len() - 1;
                    values[end] = values[end] + v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Row offsets into the index and value arrays.
    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    /// Same pattern with new values.
    pub fn with_values(&self, values: Vec<T>) -> Self {
        assert_eq!(
            values.len(),
            self.values.len(),
            "value count must match the pattern"
        );
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => T::zero(),
        }
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for p in self.indptr[i]..self.indptr[i + 1] {
                acc = acc + self.values[p] * x[self.indices[p]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                trip.push((self.indices[p], i, self.values[p]));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &trip)
    }

    pub fn scale(&self, a: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = *v * a);
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &CsrMatrix<T>) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut rows = Vec::with_capacity(self.nrows);
        for i in 0..self.nrows {
            let mut row = Vec::new();
            for p in self.indptr[i]..self.indptr[i + 1] {
                let (k, a) = (self.indices[p], self.values[p]);
                for q in other.indptr[k]..other.indptr[k + 1] {
                    row.push((other.indices[q], a * other.values[q]));
                }
            }
            rows.push(row);
        }
        Self::from_rows(other.ncols, rows)
    }

    /// `self + other` (same shape).
    pub fn add(&self, other: &CsrMatrix<T>) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let rows = (0..self.nrows)
            .map(|i| {
                let (c1, v1) = self.row(i);
                let (c2, v2) = other.row(i);
                c1.iter()
                    .copied()
                    .zip(v1.iter().copied())
                    .chain(c2.iter().copied().zip(v2.iter().copied()))
                    .collect()
            })
            .collect();
        Self::from_rows(self.ncols, rows)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for p in self.indptr[i]..self.indptr[i + 1] {
                row[self.indices[p]] = self.values[p];
            }
        }
        d
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
#[derive(Debug, Clone)]
pub struct Ilu0<T> {
    lu: CsrMatrix<T>,
    diag: Vec<usize>,
}

impl<T: Real> Ilu0<T> {
    pub fn new(a: &CsrMatrix<T>) -> Result<Self> {
        assert_eq!(a.nrows, a.ncols, "ILU(0) of a non-square matrix");
        let n = a.nrows;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for (i, d) in diag.iter_mut().enumerate() {
            if let Ok(p) = lu.indices[lu.indptr[i]..lu.indptr[i + 1]].binary_search(&i) {
                *d = lu.indptr[i] + p;
            } else {
                return Err(Error::LinearSolver(format!(
                    "structurally zero diagonal in row {i}"
                )));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.indptr[i], lu.indptr[i + 1]);
            for p in start..end {
                pos[lu.indices[p]] = p;
            }
            for p in start..end {
                let k = lu.indices[p];
                if k >= i {
                    break;
                }
                let pivot = lu.values[diag[k]];
                let factor = lu.values[p] / pivot;
                lu.values[p] = factor;
                for q in (diag[k] + 1)..lu.indptr[k + 1] {
                    let j = lu.indices[q];
                    let target = pos[j];
                    if target != usize::MAX {
                        lu.values[target] = lu.values[target] - factor * lu.values[q];
                    }
                }
            }
            let piv = lu.values[diag[i]];
            if piv == T::zero() || !piv.is_finite() {
                return Err(Error::LinearSolver(format!(
                    "zero pivot in ILU(0) at row {i}"
                )));
            }
            for p in start..end {
                pos[lu.indices[p]] = usize::MAX;
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// Solves `LU x = b` in place.
    pub fn apply(&self, x: &mut [T]) {
        let lu = &self.lu;
        let n = lu.nrows;
        for i in 0..n {
            let mut acc = x[i];
            for p in lu.indptr[i]..self.diag[i] {
                acc = acc - lu.values[p] * x[lu.indices[p]];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for p in (self.diag[i] + 1)..lu.indptr[i + 1] {
                acc = acc - lu.values[p] * x[lu.indices[p]];
            }
            x[i] = acc / lu.values[self.diag[i]];
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions<T> {
    pub restart: usize,
    pub max_iter: usize,
    /// Stop when `‖b − A x‖ ≤ rel_tol · ‖b‖` or `≤ abs_tol`.
    pub rel_tol: T,
    pub abs_tol: T,
}

impl<T: Real> Default for GmresOptions<T> {
    fn default() -> Self {
        GmresOptions {
            restart: 60,
            max_iter: 600,
            rel_tol: T::lit(1e-10),
            abs_tol: T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresStats<T> {
    pub iterations: usize,
    pub residual: T,
    pub converged: bool,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Right-preconditioned restarted GMRES; `x` holds the initial guess.
pub fn gmres<T: Real>(
    a: &CsrMatrix<T>,
    precond: &Ilu0<T>,
    b: &[T],
    x: &mut [T],
    opts: &GmresOptions<T>,
) -> GmresStats<T> {
    let n = b.len();
    let m = opts.restart.max(1);
    let target = (opts.rel_tol * norm(b)).max(opts.abs_tol);
    let mut r = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut iterations = 0;
    loop {
        a.matvec(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm(&r);
        if beta <= target || iterations >= opts.max_iter || !beta.is_finite() {
            return GmresStats {
                iterations,
                residual: beta,
                converged: beta <= target,
            };
        }
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|&v| v / beta).collect());
        let mut hess = vec![vec![T::zero(); m]; m + 1];
        let mut cs = vec![T::zero(); m];
        let mut sn = vec![T::zero(); m];
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut k_used = 0;
        let mut resid = beta;
        for k in 0..m {
            z.copy_from_slice(&basis[k]);
            precond.apply(&mut z);
            a.matvec(&z, &mut w);
            // modified Gram–Schmidt
            for (j, v) in basis.iter().enumerate() {
                let hjk = dot(&w, v);
                hess[j][k] = hjk;
                for i in 0..n {
                    w[i] = w[i] - hjk * v[i];
                }
            }
            let hnext = norm(&w);
            hess[k + 1][k] = hnext;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = (hess[k][k] * hess[k][k] + hess[k + 1][k] * hess[k + 1][k]).sqrt();
            if denom == T::zero() {
                cs[k] = T::one();
                sn[k] = T::zero();
            } else {
                cs[k] = hess[k][k] / denom;
                sn[k] = hess[k + 1][k] / denom;
            }
            hess[k][k] = cs[k] * hess[k][k] + sn[k] * hess[k + 1][k];
            hess[k + 1][k] = T::zero();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            resid = g[k + 1].abs();
            iterations += 1;
            k_used = k + 1;
            if resid <= target || iterations >= opts.max_iter || hnext == T::zero() {
                break;
            }
            basis.push(w.iter().map(|&v| v / hnext).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![T::zero(); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in (i + 1)..k_used {
                acc = acc - hess[i][j] * y[j];
            }
            y[i] = acc / hess[i][i];
        }
        let mut update = vec![T::zero(); n];
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                update[i] = update[i] + *yj * basis[j][i];
            }
        }
        precond.apply(&mut update);
        for i in 0..n {
            x[i] = x[i] + update[i];
        }
        if !resid.is_finite() {
            return GmresStats {
                iterations,
                residual: resid,
                converged: false,
            };
        }
    }
}

/// Solves `A x = b` with ILU(0)-preconditioned GMRES from a zero initial guess.
pub fn solve<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    opts: &GmresOptions<T>,
) -> Result<(Vec<T>, GmresStats<T>)> {
    let ilu = Ilu0::new(a)?;
    let mut x = vec![T::zero(); b.len()];
    let stats = gmres(a, &ilu, b, &mut x, opts);
    if !stats.converged {
        return Err(Error::LinearSolver(format!(
            "GMRES stopped after {} iterations with residual {:e}",
            stats.iterations, stats.residual
        )));
    }
    Ok((x, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            t.push((i, (i + 1) % n, -1.0));
            t.push((i, (i + n - 1) % n, -1.0));
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn transpose_and_matmul() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 1, 2.0), (1, 2, 3.0), (1, 0, -1.0)]);
        let at = a.transpose();
        assert_eq!(at.get(1, 0), 2.0);
        assert_eq!(at.get(2, 1), 3.0);
        let p = a.matmul(&at);
        assert_eq!(p.to_dense(), vec![vec![4.0, 0.0], vec![0.0, 10.0]]);
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal_without_wrap() {
        let n = 10;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -2.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let ilu = Ilu0::new(&a).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut x = a.mul_vec(&x_true);
        ilu.apply(&mut x);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn gmres_solves_periodic_system() {
        let n = 200;
        let a = laplace_1d(n, 0.01);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin() + 0.3).collect();
        let b = a.mul_vec(&x_true);
        let opts = GmresOptions {
            rel_tol: 1e-13,
            max_iter: 2000,
            ..Default::default()
        };
        let (x, stats) = solve(&a, &b, &opts).unwrap();
        assert!(stats.converged);
        let err = x
            .iter()
            .zip(&x_true)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "error {err}");
    }

    #[test]
    fn missing_diagonal_is_reported() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        assert!(Ilu0::new(&a).is_err());
    }
}
