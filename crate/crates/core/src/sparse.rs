//! Thin helpers over faer's compressed sparse column matrices.

use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat, Triplet};

use crate::error::{LdgError, Result};

pub type SparseMatrix = SparseColMat<usize, f64>;

/// Sparse matrix from `(row, col, value)` entries; duplicates are summed.
pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Result<SparseMatrix> {
    let t: Vec<Triplet<usize, usize, f64>> = entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    SparseColMat::try_new_from_triplets(nrows, ncols, &t)
        .map_err(|e| LdgError::InvalidParameter(format!("sparse matrix creation: {e:?}")))
}

/// `y = A x`.
pub fn mul_vec(a: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    let s = a.symbolic();
    let mut y = vec![0.0; a.nrows()];
    let cp = s.col_ptr();
    let ri = s.row_idx();
    let val = a.val();
    for (j, xj) in x.iter().enumerate().take(a.ncols()) {
        for idx in cp[j]..cp[j + 1] {
            y[ri[idx]] += val[idx] * xj;
        }
    }
    y
}

/// `y = Aᵀ x`.
pub fn mul_vec_transpose(a: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    let s = a.symbolic();
    let cp = s.col_ptr();
    let ri = s.row_idx();
    let val = a.val();
    (0..a.ncols())
        .map(|j| (cp[j]..cp[j + 1]).map(|idx| val[idx] * x[ri[idx]]).sum())
        .collect()
}

/// Row/column pairs of the nonzero pattern, column-major.
pub fn pattern_pairs(a: &SparseMatrix) -> Vec<(usize, usize)> {
    let s = a.symbolic();
    let cp = s.col_ptr();
    let ri = s.row_idx();
    let mut out = Vec::with_capacity(ri.len());
    for j in 0..a.ncols() {
        for &r in &ri[cp[j]..cp[j + 1]] {
            out.push((r, j));
        }
    }
    out
}

/// Fixed entry order for repeated assembly of matrices with the same
/// pattern: values are supplied in the order the indices were registered.
#[derive(Clone, Debug)]
pub struct AssemblyPattern {
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    len: usize,
}

impl AssemblyPattern {
    pub fn new(nrows: usize, ncols: usize, indices: &[(usize, usize)]) -> Result<Self> {
        let pairs: Vec<Pair<usize, usize>> = indices.iter().map(|&(r, c)| Pair::new(r, c)).collect();
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(nrows, ncols, &pairs)
            .map_err(|e| LdgError::InvalidParameter(format!("sparsity pattern: {e:?}")))?;
        Ok(AssemblyPattern {
            symbolic,
            argsort,
            len: indices.len(),
        })
    }

    /// Number of registered entries (with duplicates).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn nnz(&self) -> usize {
        self.symbolic.row_idx().len()
    }

    pub fn assemble(&self, values: &[f64]) -> Result<SparseMatrix> {
        if values.len() != self.len {
            return Err(LdgError::DimensionMismatch {
                expected: self.len,
                got: values.len(),
            });
        }
        SparseColMat::new_from_argsort(self.symbolic.clone(), &self.argsort, values)
            .map_err(|e| LdgError::InvalidParameter(format!("sparse assembly: {e:?}")))
    }
}
