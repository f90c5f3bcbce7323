//! Compressed-row complex operator used for the graph Laplacians.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Square complex matrix in CSR layout. Rows keep their entries sorted by
/// column.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl CsrMatrix {
    /// Builds from per-row `(col, value)` lists.
    pub fn from_rows(rows: Vec<Vec<(usize, Complex64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|(c, _)| *c);
            for (c, v) in row {
                debug_assert!(c < n);
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator must be square");
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter(|&j| m[(i, j)] != Complex64::new(0.0, 0.0))
                    .map(|j| (j, m[(i, j)]))
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// True when every stored entry lies on the diagonal.
    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, _)| j == i))
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// `a * self + b * I`, keeping the sparsity pattern plus the diagonal.
    pub fn scale_shift(&self, a: f64, b: f64) -> CsrMatrix {
        let rows = (0..self.n)
            .map(|i| {
                let mut row: Vec<(usize, Complex64)> = self.row(i).map(|(j, v)| (j, v * a)).collect();
                match row.iter_mut().find(|(j, _)| *j == i) {
                    Some((_, v)) => *v += b,
                    None => row.push((i, Complex64::new(b, 0.0))),
                }
                row
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `self * x` for a dense block of column vectors.
    pub fn mul_dense(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        assert_eq!(x.nrows(), self.n, "operator/block dimension mismatch");
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let mut oc = out.column_mut(c);
            for i in 0..self.n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.vals[k] * xc[self.cols[k]];
                }
                oc[i] = acc;
            }
        }
        out
    }

    /// Largest deviation from Hermitian symmetry over all entries.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.to_dense();
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((d[(i, j)] - d[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

/// Outcome of [`power_iteration`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    pub eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Dominant eigenvalue of a Hermitian positive semi-definite operator via the
/// Rayleigh quotient of repeated products. Converged when successive
/// estimates differ by less than `tol` relative to `max(1, |λ|)`.
pub fn power_iteration(op: &CsrMatrix, tol: f64, max_iter: usize) -> PowerIteration {
    let n = op.dim();
    if n == 0 {
        return PowerIteration {
            eigenvalue: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a7c);
    let mut x: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    normalise(&mut x);
    let mut prev = f64::NAN;
    for it in 1..=max_iter {
        let y = op.mul_vec(&x);
        let lambda: f64 = x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum();
        let norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return PowerIteration {
                eigenvalue: 0.0,
                iterations: it,
                converged: true,
            };
        }
        if (lambda - prev).abs() < tol * lambda.abs().max(1.0) {
            return PowerIteration {
                eigenvalue: lambda,
                iterations: it,
                converged: true,
            };
        }
        prev = lambda;
        x = y.into_iter().map(|v| v / norm).collect();
    }
    PowerIteration {
        eigenvalue: prev,
        iterations: max_iter,
        converged: false,
    }
}

fn normalise(x: &mut [Complex64]) {
    let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dense_round_trip_and_products() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        let s = CsrMatrix::from_dense(&m);
        assert_eq!(s.to_dense(), m);
        assert_eq!(s.hermitian_defect(), 0.0);
        let x = DMatrix::from_row_slice(2, 1, &[c(1.0, 0.0), c(0.0, 1.0)]);
        assert_eq!(s.mul_dense(&x), &m * &x);
    }

    #[test]
    fn power_iteration_on_two_node_laplacian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        let r = power_iteration(&CsrMatrix::from_dense(&m), 1e-12, 1000);
        assert!(r.converged);
        assert!((r.eigenvalue - 2.0).abs() < 1e-10);
    }

    #[test]
    fn zero_operator_has_zero_dominant_eigenvalue() {
        let z = CsrMatrix::from_rows(vec![vec![], vec![]]);
        assert_eq!(power_iteration(&z, 1e-6, 1000).eigenvalue, 0.0);
    }
}
