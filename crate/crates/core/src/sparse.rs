use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::MatMut;

use crate::{Error, Result};

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    /// `out = self * x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(out.len(), self.nrows);
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in dense.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        dense
    }
}

/// Sparsity pattern and constant part of the per-step matrix
/// `M/dt + K + diag(shift)`, with the symbolic LU shared by every step.
///
/// `K` is symmetric, so its CSR arrays double as CSC arrays for faer.
#[derive(Debug, Clone)]
pub(crate) struct StepPattern {
    symbolic: SymbolicSparseColMat<usize>,
    base: Vec<f64>,
    diag_pos: Vec<usize>,
    lu: SymbolicLu<usize>,
    csr: Arc<Pattern>,
}

impl StepPattern {
    pub(crate) fn new(stiffness: &CsrMatrix, mass: &[f64], dt: f64) -> Result<Self> {
        let n = stiffness.nrows();
        let mut diag_pos = vec![usize::MAX; n];
        for r in 0..n {
            let span = stiffness.row_ptr[r]..stiffness.row_ptr[r + 1];
            let pos = stiffness.col_idx[span.clone()]
                .binary_search(&r)
                .map_err(|_| Error::param("stiffness matrix lacks a diagonal entry"))?;
            diag_pos[r] = span.start + pos;
        }
        let mut base = stiffness.values.clone();
        for (r, &p) in diag_pos.iter().enumerate() {
            base[p] += mass[r] / dt;
        }
        let symbolic = SymbolicSparseColMat::new_checked(
            n,
            n,
            stiffness.row_ptr.clone(),
            None,
            stiffness.col_idx.clone(),
        );
        let lu = SymbolicLu::try_new(symbolic.as_ref())
            .map_err(|_| Error::param("symbolic factorization failed"))?;
        let csr = Arc::new(Pattern {
            row_ptr: stiffness.row_ptr.clone(),
            col_idx: stiffness.col_idx.clone(),
        });
        Ok(Self { symbolic, base, diag_pos, lu, csr })
    }

    pub(crate) fn dim(&self) -> usize {
        self.diag_pos.len()
    }

    /// Factors `M/dt + K + diag(shift)`; `step` only labels errors.
    pub(crate) fn factor(&self, shift: &[f64], step: usize) -> Result<StepFactor> {
        debug_assert_eq!(shift.len(), self.dim());
        let mut values = self.base.clone();
        for (&p, &s) in self.diag_pos.iter().zip(shift) {
            values[p] += s;
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix { step });
        }
        let mat = SparseColMatRef::new(self.symbolic.as_ref(), &values);
        let lu = Lu::try_new_with_symbolic(self.lu.clone(), mat)
            .map_err(|_| Error::SingularMatrix { step })?;
        Ok(StepFactor { lu, values, pattern: Arc::clone(&self.csr), step })
    }
}

#[derive(Debug)]
struct Pattern {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

/// A factored step matrix.
#[derive(Debug, Clone)]
pub(crate) struct StepFactor {
    lu: Lu<usize, f64>,
    values: Vec<f64>,
    pattern: Arc<Pattern>,
    step: usize,
}

impl StepFactor {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.pattern.row_ptr.len() - 1;
        (0..n)
            .map(|r| {
                (self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1])
                    .map(|p| self.values[p] * x[self.pattern.col_idx[p]])
                    .sum()
            })
            .collect()
    }

    /// Solves in place. The matrix is symmetric, so this is also the
    /// transpose solve used by the adjoint sweep.
    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) -> Result<()> {
        let b = rhs.to_vec();
        let n = rhs.len();
        self.lu.solve_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix { step: self.step });
        }
        let ax = self.apply(rhs);
        let scale = b
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
            .max(ax.iter().map(|v| v.abs()).fold(0.0, f64::max));
        let resid = ax.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if resid > 1e-8 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::SingularMatrix { step: self.step });
        }
        Ok(())
    }
}
