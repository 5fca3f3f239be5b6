//! Sparse and dense linear algebra helpers: triplet assembly, products and a
//! fill-reducing sparse Cholesky with numeric refactorization.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};

/// Builds a CSC matrix from `(row, col, value)` triplets, summing duplicates.
/// Explicit zeros are kept so that patterns stay stable across reassembly.
pub fn csc_from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> CscMatrix<f64> {
    let mut coo = CooMatrix::new(nrows, ncols);
    for &(i, j, v) in triplets {
        coo.push(i, j, v);
    }
    CscMatrix::from(&coo)
}

pub fn mul(a: &CscMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = DVector::zeros(a.nrows());
    for (j, col) in a.col_iter().enumerate() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            y[i] += v * xj;
        }
    }
    y
}

pub fn mul_transpose(a: &CscMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    assert_eq!(a.nrows(), x.len());
    DVector::from_iterator(
        a.ncols(),
        a.col_iter().map(|col| col.row_indices().iter().zip(col.values()).map(|(&i, &v)| v * x[i]).sum()),
    )
}

pub fn mul_dense(a: &CscMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(a.nrows(), x.ncols());
    for c in 0..x.ncols() {
        y.set_column(c, &mul(a, &x.column(c).into_owned()));
    }
    y
}

pub fn mul_transpose_dense(a: &CscMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(a.ncols(), x.ncols());
    for c in 0..x.ncols() {
        y.set_column(c, &mul_transpose(a, &x.column(c).into_owned()));
    }
    y
}

pub fn to_dense(a: &CscMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (j, col) in a.col_iter().enumerate() {
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            d[(i, j)] += v;
        }
    }
    d
}

/// Position of entry `(i, j)` in the value array of `a`.
pub fn csc_position(a: &CscMatrix<f64>, i: usize, j: usize) -> Option<usize> {
    let offsets = a.col_offsets();
    let rows = &a.row_indices()[offsets[j]..offsets[j + 1]];
    rows.binary_search(&i).ok().map(|k| offsets[j] + k)
}

/// Diagonal of `a` if it has no off-diagonal nonzeros.
pub fn diagonal_of(a: &CscMatrix<f64>) -> Option<DVector<f64>> {
    let mut d = DVector::zeros(a.nrows());
    for (j, col) in a.col_iter().enumerate() {
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            if i == j {
                d[i] += v;
            } else if v != 0.0 {
                return None;
            }
        }
    }
    Some(d)
}

/// Greedy minimum-degree ordering on the symmetric adjacency graph of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn minimum_degree_ordering(a: &CscMatrix<f64>) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (j, col) in a.col_iter().enumerate() {
        for &i in col.row_indices() {
            if i != j {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let neighbours: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &a in &neighbours {
            adj[a].remove(&v);
        }
        for (k, &a) in neighbours.iter().enumerate() {
            for &b in &neighbours[k + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        for &a in &neighbours {
            heap.push(Reverse((adj[a].len(), a)));
        }
    }
    order
}

/// Sparse Cholesky of a symmetric positive definite matrix with a fixed
/// sparsity pattern. The ordering and symbolic analysis are computed once;
/// [`SparseCholesky::refactor`] accepts new values in the original layout.
pub struct SparseCholesky {
    perm: Vec<usize>,
    permuted: CscMatrix<f64>,
    value_map: Vec<usize>,
    factor: Option<CscCholesky<f64>>,
    max_diag: f64,
}

impl SparseCholesky {
    pub fn new(a: &CscMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        let perm = minimum_degree_ordering(a);
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut columns: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut k = 0;
        for (j, col) in a.col_iter().enumerate() {
            for &i in col.row_indices() {
                columns[inverse[j]].push((inverse[i], k));
                k += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut rows = Vec::with_capacity(a.nnz());
        let mut value_map = vec![0; a.nnz()];
        offsets.push(0);
        for col in &mut columns {
            col.sort_unstable();
            for &(r, orig) in col.iter() {
                value_map[orig] = rows.len();
                rows.push(r);
            }
            offsets.push(rows.len());
        }
        let permuted = CscMatrix::try_from_csc_data(n, n, offsets, rows, vec![0.0; a.nnz()])
            .map_err(|e| Error::DimensionMismatch(format!("sparse pattern: {e}")))?;
        let mut solver = Self { perm, permuted, value_map, factor: None, max_diag: 0.0 };
        solver.refactor(a.values())?;
        Ok(solver)
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn refactor(&mut self, values: &[f64]) -> Result<()> {
        assert_eq!(values.len(), self.value_map.len(), "values do not match the analysed pattern");
        {
            let (_, _, data) = self.permuted.csc_data_mut();
            for (k, &v) in values.iter().enumerate() {
                data[self.value_map[k]] = v;
            }
        }
        self.max_diag = (0..self.dim())
            .filter_map(|j| csc_position(&self.permuted, j, j).map(|k| self.permuted.values()[k].abs()))
            .fold(0.0, f64::max);
        let result = match self.factor.as_mut() {
            Some(f) => f.refactor(self.permuted.values()),
            None => CscCholesky::factor(&self.permuted).map(|f| {
                self.factor = Some(f);
            }),
        };
        if result.is_err() {
            // the factor's workspace is not reset after a breakdown
            self.factor = None;
            return Err(Error::NotPositiveDefinite(format!("sparse Cholesky of a {}x{} matrix", self.dim(), self.dim())));
        }
        Ok(())
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let factor = self.factor.as_ref().expect("factorization available");
        let pb = DMatrix::from_iterator(b.len(), 1, self.perm.iter().map(|&old| b[old]));
        let px = factor.solve(&pb);
        let mut x = DVector::zeros(b.len());
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = px[(new, 0)];
        }
        x
    }

    /// `min_k L_kk^2 / max_k |A_kk|`; small values flag numerical rank loss.
    pub fn min_pivot_ratio(&self) -> f64 {
        let Some(f) = self.factor.as_ref() else { return 0.0 };
        let l = f.l();
        let min = (0..self.dim())
            .filter_map(|j| csc_position(l, j, j).map(|k| l.values()[k].powi(2)))
            .fold(f64::INFINITY, f64::min);
        if self.max_diag > 0.0 {
            min / self.max_diag
        } else {
            0.0
        }
    }
}

/// Orthonormalizes the columns of `candidates` in the inner product
/// `x^T M y` (given through `apply_mass`) with two passes of modified
/// Gram-Schmidt. Columns whose remaining norm falls below
/// `tol * max_norm` are dropped.
pub fn orthonormalize(
    candidates: &DMatrix<f64>,
    apply_mass: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    tol: f64,
) -> DMatrix<f64> {
    let norms: Vec<f64> = candidates
        .column_iter()
        .map(|c| {
            let c = c.into_owned();
            c.dot(&apply_mass(&c)).max(0.0).sqrt()
        })
        .collect();
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut mass_basis: Vec<DVector<f64>> = Vec::new();
    if scale == 0.0 {
        return DMatrix::zeros(candidates.nrows(), 0);
    }
    for c in candidates.column_iter() {
        let mut v = c.into_owned();
        for _ in 0..2 {
            for (b, mb) in basis.iter().zip(&mass_basis) {
                let coeff = v.dot(mb);
                v.axpy(-coeff, b, 1.0);
            }
        }
        let mv = apply_mass(&v);
        let norm = v.dot(&mv).max(0.0).sqrt();
        if norm > tol * scale {
            basis.push(v / norm);
            mass_basis.push(mv / norm);
        }
    }
    let cols: Vec<DVector<f64>> = basis;
    if cols.is_empty() {
        return DMatrix::zeros(candidates.nrows(), 0);
    }
    DMatrix::from_columns(&cols)
}

/// Extreme eigenvalues of the symmetric-definite pencil `(a, b)`.
pub fn generalized_eigen_range(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, f64)> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("reference Gram matrix".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("reference Gram factor".into()))?;
    let c = &linv * a * linv.transpose();
    let sym = (&c + c.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max))
}
