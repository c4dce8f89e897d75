//! Compressed-row complex matrices over a truncated Fock basis.
//!
//! Every Hamiltonian, ladder operator and collapse operator in the crate is an
//! [`Operator`]. Dense matrices (density operators, eigenvector blocks) use
//! `nalgebra::DMatrix<C64>` in column-major order; the `apply_*` methods work
//! directly on those column-major slices so that the master-equation
//! right-hand side never allocates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self::from_triplets(
            diag.len(),
            diag.iter()
                .enumerate()
                .map(|(i, &d)| (i, i, C64::new(d, 0.0))),
        )
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and exact zeros dropped.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for (r, c, v) in triplets {
            assert!(
                r < dim && c < dim,
                "triplet ({r}, {c}) outside dimension {dim}"
            );
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != ZERO {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator must be square");
        let n = m.nrows();
        Self::from_triplets(
            n,
            (0..n)
                .flat_map(|r| (0..n).map(move |c| (r, c)))
                .map(|(r, c)| (r, c, m[(r, c)])),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out.prune()
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    fn prune(self) -> Self {
        let dim = self.dim;
        Self::from_triplets(dim, self.triplets().collect::<Vec<_>>())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_dim(other);
        Self::from_triplets(self.dim, self.triplets().chain(other.triplets()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale_real(-1.0))
    }

    /// Sum of `coeff * op` over the given terms.
    pub fn linear_combination<'a, I>(dim: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (C64, &'a Operator)>,
    {
        let mut triplets = Vec::new();
        for (s, op) in terms {
            assert_eq!(op.dim, dim);
            triplets.extend(op.triplets().map(|(r, c, v)| (r, c, s * v)));
        }
        Self::from_triplets(dim, triplets)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        self.check_dim(other);
        let mut triplets = Vec::new();
        let mut acc = vec![ZERO; self.dim];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let (mid, a) = (self.cols[k], self.vals[k]);
                for l in other.row_ptr[mid]..other.row_ptr[mid + 1] {
                    let c = other.cols[l];
                    if acc[c] == ZERO {
                        touched.push(c);
                    }
                    acc[c] += a * other.vals[l];
                }
            }
            for &c in &touched {
                triplets.push((r, c, acc[c]));
                acc[c] = ZERO;
            }
            touched.clear();
        }
        Self::from_triplets(self.dim, triplets)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest absolute entry of `self - self^dagger`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    pub fn diagonal_entries(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// Restriction to the rows/columns listed in `indices` (in that order).
    pub fn submatrix(&self, indices: &[usize]) -> DMatrix<C64> {
        let mut position = vec![usize::MAX; self.dim];
        for (p, &i) in indices.iter().enumerate() {
            position[i] = p;
        }
        let mut m = DMatrix::zeros(indices.len(), indices.len());
        for (p, &r) in indices.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let q = position[self.cols[k]];
                if q != usize::MAX {
                    m[(p, q)] = self.vals[k];
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.dim);
        self.mul_vec_into(v.as_slice(), out.as_mut_slice(), C64::new(1.0, 0.0), false);
        out
    }

    /// `out (+)= s * self * v`; accumulates when `accumulate` is set.
    pub fn mul_vec_into(&self, v: &[C64], out: &mut [C64], s: C64, accumulate: bool) {
        debug_assert_eq!(v.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for r in 0..self.dim {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            if accumulate {
                out[r] += s * acc;
            } else {
                out[r] = s * acc;
            }
        }
    }

    /// `<u| self |v>`.
    pub fn matrix_element(&self, u: &DVector<C64>, v: &DVector<C64>) -> C64 {
        u.dotc(&self.mul_vec(v))
    }

    pub fn expectation(&self, psi: &DVector<C64>) -> C64 {
        self.matrix_element(psi, psi)
    }

    /// `out += s * self * m`, `m` a column-major `dim x dim` matrix.
    pub fn apply_left_acc(&self, m: &[C64], out: &mut [C64], s: C64) {
        let n = self.dim;
        debug_assert_eq!(m.len(), n * n);
        for col in 0..n {
            let mc = &m[col * n..(col + 1) * n];
            let oc = &mut out[col * n..(col + 1) * n];
            for r in 0..n {
                let mut acc = ZERO;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[k] * mc[self.cols[k]];
                }
                oc[r] += s * acc;
            }
        }
    }

    /// `out += s * m * self^dagger`, `m` a column-major `dim x dim` matrix.
    pub fn apply_right_adjoint_acc(&self, m: &[C64], out: &mut [C64], s: C64) {
        let n = self.dim;
        debug_assert_eq!(m.len(), n * n);
        // (m A^dag)[:, r] = sum_j m[:, j] conj(A[r, j])
        for r in 0..n {
            let oc = r * n;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let coeff = s * self.vals[k].conj();
                let mc = self.cols[k] * n;
                for i in 0..n {
                    out[oc + i] += coeff * m[mc + i];
                }
            }
        }
    }

    /// `self * m * self^dagger` for dense `m`.
    pub fn sandwich(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let n = self.dim;
        let mut left = DMatrix::zeros(n, n);
        self.apply_left_acc(m.as_slice(), left.as_mut_slice(), C64::new(1.0, 0.0));
        let mut out = DMatrix::zeros(n, n);
        self.apply_right_adjoint_acc(left.as_slice(), out.as_mut_slice(), C64::new(1.0, 0.0));
        out
    }

    pub fn check_dim(&self, other: &Self) {
        assert_eq!(self.dim, other.dim, "operator dimension mismatch");
    }

    pub fn require_dim(&self, dim: usize) -> Result<()> {
        if self.dim == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: dim,
                got: self.dim,
            })
        }
    }
}
