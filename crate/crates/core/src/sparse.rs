//! Compressed sparse row matrices and the sparse direct solve.

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Row-compressed matrix with sorted, duplicate-free column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Duplicate entries are summed in input order, so the result is reproducible.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].0, triplets[t].1));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for t in order {
            let (i, j, v) = triplets[t];
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().expect("entry present") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Empty matrix whose pattern contains the given `(row, col)` pairs.
    pub fn with_pattern(nrows: usize, ncols: usize, entries: &[(usize, usize)]) -> Self {
        let triplets: Vec<(usize, usize, T)> = entries.iter().map(|&(i, j)| (i, j, T::zero())).collect();
        Self::from_triplets(nrows, ncols, &triplets)
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, T::one())).collect();
        Self::from_triplets(n, n, &triplets)
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

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// Position of `(i, j)` in the value array, if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].binary_search(&j).ok().map(|p| r.start + p)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.position(i, j).map_or(T::zero(), |p| self.values[p])
    }

    /// Adds `v` to an entry that must already be in the pattern.
    pub fn add_at(&mut self, i: usize, j: usize, v: T) {
        let p = self.position(i, j).expect("entry in sparsity pattern");
        self.values[p] += v;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `b − A x` with each row accumulated in twice the working precision
    /// (error-free products via fused multiply-add and error-free sums), rounded once.
    pub fn residual_compensated(&self, x: &[T], b: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(b.len(), self.nrows);
        (0..self.nrows)
            .map(|i| {
                let mut sum = b[i];
                let mut carry = T::zero();
                for (j, v) in self.row(i) {
                    let p = -v * x[j];
                    let p_err = (-v).mul_add(x[j], -p);
                    let t = sum + p;
                    let z = t - sum;
                    carry += (sum - (t - z)) + (p - z) + p_err;
                    sum = t;
                }
                sum + carry
            })
            .collect()
    }

    pub fn transpose_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![T::zero(); self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    /// `self + scale·other` (patterns may differ).
    pub fn add_scaled(&self, other: &Self, scale: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, scale * v)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }
}

/// Sparse LU factorization with partial pivoting, reusable for several right-hand sides.
pub struct SparseLu<T: Scalar> {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, T>,
}

impl<T: Scalar> SparseLu<T> {
    /// Fails with [`Error::Singular`] if the factorization finds a structurally empty
    /// pivot column.
    pub fn factor(matrix: &CsrMatrix<T>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::Argument(format!("cannot factor a {}x{} matrix", n, matrix.ncols())));
        }
        let triplets: Vec<Triplet<usize, usize, T>> = matrix
            .triplets()
            .into_iter()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let a = SparseColMat::<usize, T>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Argument(format!("sparse matrix construction failed: {e:?}")))?;
        let lu = a.sp_lu().map_err(|e| match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => Error::Singular { pivot: index },
            other => Error::Argument(format!("sparse LU failed: {other:?}")),
        })?;
        Ok(Self { n, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves with the factors; numerically singular factors show up as non-finite
    /// entries, reported as [`Error::Singular`] at the first one.
    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        if rhs.len() != self.n {
            return Err(Error::Argument(format!(
                "right-hand side of length {} for a system of size {}",
                rhs.len(),
                self.n
            )));
        }
        let b = Mat::<T>::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        let x: Vec<T> = (0..self.n).map(|i| x[(i, 0)]).collect();
        match x.iter().position(|v| !v.is_finite()) {
            Some(pivot) => Err(Error::Singular { pivot }),
            None => Ok(x),
        }
    }
}

/// Upper bound on iterative refinement steps after a direct solve.
pub const REFINEMENT_STEPS: usize = 4;

/// Iterative refinement of `x` for `A x = b` with residuals from
/// [`CsrMatrix::residual_compensated`] and corrections from `solve`, stopping once the
/// corrections stop shrinking.
///
/// Partial pivoting is backward stable even on a singular matrix, so a tiny pivot gives
/// a finite but meaningless answer with a small residual. What gives it away is that the
/// corrections never settle: if the smallest one is still above `√ε·‖x‖∞` the system is
/// reported as [`Error::Singular`] at the component of the largest correction.
pub fn refine<T: Scalar>(
    matrix: &CsrMatrix<T>,
    rhs: &[T],
    x: &mut [T],
    solve: impl Fn(&[T]) -> Result<Vec<T>>,
) -> Result<()> {
    let mut last = T::infinity();
    let mut worst = 0;
    for _ in 0..REFINEMENT_STEPS {
        let residual = matrix.residual_compensated(x, rhs);
        let Ok(dx) = solve(&residual) else { break };
        let (at, size) = dx
            .iter()
            .enumerate()
            .fold((0, T::zero()), |(i, m), (j, d)| if d.abs() > m { (j, d.abs()) } else { (i, m) });
        if !(size < last) {
            break;
        }
        last = size;
        worst = at;
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        if size == T::zero() {
            break;
        }
    }
    let scale = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale > T::zero() && !(last <= T::epsilon().sqrt() * scale) {
        return Err(Error::Singular { pivot: worst });
    }
    Ok(())
}

/// Direct sparse LU solve of `A x = b` followed by [`refine`].
pub fn solve_linear<T: Scalar>(matrix: &CsrMatrix<T>, rhs: &[T]) -> Result<Vec<T>> {
    let n = matrix.nrows();
    if matrix.ncols() != n || rhs.len() != n {
        return Err(Error::Argument(format!(
            "cannot solve {}x{} system with right-hand side of length {}",
            n,
            matrix.ncols(),
            rhs.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let lu = SparseLu::factor(matrix)?;
    let mut x = lu.solve(rhs)?;
    refine(matrix, rhs, &mut x, |r| lu.solve(r))?;
    Ok(x)
}
