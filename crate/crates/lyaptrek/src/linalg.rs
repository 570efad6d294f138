//! Internal dense solvers: Gaussian elimination with partial pivoting
//! and a pivoted Cholesky positive-semidefiniteness check.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::num;

/// Solves `A x = b` for a single right-hand side by Gaussian
/// elimination with partial (row) pivoting. `A` is consumed as a dense
/// copy; intended for systems up to a few hundred unknowns (the
/// Kronecker systems reach d^2 <= 900).
pub(crate) fn solve_dense(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if !a.is_square() || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: (n, n),
            found: (a.rows(), a.cols()),
        });
    }
    let mut m = a.data().to_vec();
    let mut x = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for col in 0..n {
        // Partial pivot: largest magnitude in the column at or below
        // the diagonal.
        let mut pivot_row = col;
        let mut pivot_val = num::abs(m[perm[col] * n + col]);
        for r in (col + 1)..n {
            let v = num::abs(m[perm[r] * n + col]);
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val == 0.0 || !pivot_val.is_finite() {
            return Err(Error::SingularSystem);
        }
        perm.swap(col, pivot_row);
        let p = perm[col];
        let inv = 1.0 / m[p * n + col];
        for r in (col + 1)..n {
            let row = perm[r];
            let factor = m[row * n + col] * inv;
            if factor == 0.0 {
                continue;
            }
            m[row * n + col] = 0.0;
            for c in (col + 1)..n {
                m[row * n + c] -= factor * m[p * n + c];
            }
            x[row] -= factor * x[p];
        }
    }

    // Back substitution in pivoted order.
    let mut out = vec![0.0; n];
    for col in (0..n).rev() {
        let p = perm[col];
        let mut acc = x[p];
        for c in (col + 1)..n {
            acc -= m[p * n + c] * out[c];
        }
        out[col] = acc / m[p * n + col];
    }
    Ok(out)
}

/// Solves `A X = B` column by column.
pub(crate) fn solve_dense_matrix(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    if b.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: (n, b.cols()),
            found: (b.rows(), b.cols()),
        });
    }
    let mut out = DenseMatrix::zeros(n, b.cols())?;
    let mut col = vec![0.0; n];
    for j in 0..b.cols() {
        for i in 0..n {
            col[i] = b.at(i, j);
        }
        let x = solve_dense(a, &col)?;
        for i in 0..n {
            out[(i, j)] = x[i];
        }
    }
    Ok(out)
}

/// Forward substitution for a lower-triangular system `L x = b`
/// (diagonal must be nonzero; used for unit-diagonal `I - B`).
pub(crate) fn solve_lower_triangular(l: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = l.rows();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut acc = b[i];
        for j in 0..i {
            acc -= l.at(i, j) * x[j];
        }
        let d = l.at(i, i);
        if d == 0.0 {
            return Err(Error::SingularSystem);
        }
        x[i] = acc / d;
    }
    Ok(x)
}

/// Positive-semidefiniteness check by Cholesky with diagonal pivoting.
///
/// Fails with `NotPsd` when the largest remaining diagonal entry drops
/// below `floor` (a small negative tolerance); terminates early and
/// accepts once the remaining diagonal is numerically zero.
pub(crate) fn check_psd(a: &DenseMatrix, floor: f64) -> Result<()> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: (n, n),
            found: (a.rows(), a.cols()),
        });
    }
    let mut m = a.data().to_vec();
    // Active index set; pivoting swaps indices rather than rows.
    let mut idx: Vec<usize> = (0..n).collect();
    let scale = a.max_abs().max(1.0);
    let negligible = scale * 1e-15;

    for step in 0..n {
        // Select the largest remaining diagonal entry.
        let mut best = step;
        let mut best_val = m[idx[step] * n + idx[step]];
        for k in (step + 1)..n {
            let v = m[idx[k] * n + idx[k]];
            if v > best_val {
                best_val = v;
                best = k;
            }
        }
        idx.swap(step, best);
        let p = idx[step];
        let pivot = m[p * n + p];
        if pivot < floor {
            return Err(Error::NotPsd { pivot });
        }
        if pivot <= negligible {
            // Remaining block is numerically zero on the diagonal; all
            // other remaining diagonals are <= pivot (pivoting), and a
            // PSD matrix with zero diagonal has a zero row, so accept.
            return Ok(());
        }
        // Schur complement update of the remaining block.
        for r in (step + 1)..n {
            let ir = idx[r];
            let lr = m[ir * n + p] / pivot;
            for c in (step + 1)..=r {
                let ic = idx[c];
                let v = m[ir * n + ic] - lr * m[ic * n + p];
                m[ir * n + ic] = v;
                m[ic * n + ir] = v;
            }
        }
    }
    Ok(())
}
