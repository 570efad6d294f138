//! Linear additive noise models `X = B X + eps`, `Cov(eps) = Omega`:
//! their implied covariance `(I-B)^{-1} Omega (I-B)^{-T}` and the
//! last-variance decomposition that contrasts with the Lyapunov
//! lower bound (exact equality with weight one here, inequality with
//! weight one-half there).

use alloc::vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lyapunov;
use crate::matrix::DenseMatrix;

/// A linear additive noise model: structural matrix `B` with zero
/// diagonal and symmetric positive semidefinite noise covariance
/// `Omega`, both `d x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LanModel {
    b: DenseMatrix,
    omega: DenseMatrix,
}

impl LanModel {
    /// Validates and stores the pair: `B` square with zero diagonal,
    /// `Omega` of matching shape, symmetric (within `1e-12`, then
    /// symmetrized exactly) and positive semidefinite.
    pub fn new(b: DenseMatrix, omega: DenseMatrix) -> Result<Self> {
        let omega_sym = lyapunov::validate_pair(&b, &omega)?;
        for i in 0..b.rows() {
            if b.at(i, i) != 0.0 {
                return Err(Error::Precondition(
                    "structural matrix must have zero diagonal",
                ));
            }
        }
        linalg::check_psd(&omega_sym, lyapunov::C_PSD_FLOOR)?;
        Ok(Self {
            b,
            omega: omega_sym,
        })
    }

    /// The structural matrix.
    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    /// The (symmetrized) noise covariance.
    pub fn omega(&self) -> &DenseMatrix {
        &self.omega
    }

    /// Number of variables.
    pub fn d(&self) -> usize {
        self.b.rows()
    }
}

/// Solves `A X = B` columnwise, taking the forward-substitution route
/// when `A` is lower triangular (the common acyclic case) and Gaussian
/// elimination otherwise.
fn solve_columns(a: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_lower_triangular() {
        return linalg::solve_dense_matrix(a, rhs);
    }
    let d = a.rows();
    let mut out = DenseMatrix::zeros(d, rhs.cols())?;
    let mut col = vec![0.0; d];
    for j in 0..rhs.cols() {
        for i in 0..d {
            col[i] = rhs.at(i, j);
        }
        let x = linalg::solve_lower_triangular(a, &col)?;
        for i in 0..d {
            out[(i, j)] = x[i];
        }
    }
    Ok(out)
}

/// The covariance implied by a linear additive noise model:
/// `Sigma = (I - B)^{-1} Omega (I - B)^{-T}`, symmetrized. Fails with
/// [`Error::SingularIminusB`] when `I - B` is numerically singular.
pub fn lan_sigma(model: &LanModel) -> Result<DenseMatrix> {
    let a = model.b().scale(-1.0).add_scaled_identity(1.0)?;
    let result = (|| {
        let x = solve_columns(&a, model.omega())?;
        let sigma = solve_columns(&a, &x.transpose())?.transpose();
        sigma.symmetrize()
    })();
    match result {
        Err(Error::SingularSystem) => Err(Error::SingularIminusB),
        other => other,
    }
}

/// Splits the last variable's variance into its noise and signal
/// parts. For lower-triangular `B` whose noise covariance has a
/// diagonal last row (the last noise term is uncorrelated with the
/// others),
///
/// ```text
/// Sigma_dd = Omega_dd + B_d1 Sigma_11 B_d1^T
/// ```
///
/// where `Sigma_11` is the covariance of the leading `(d-1)`-submodel
/// and `B_d1` is the last row of `B` without its diagonal entry.
/// Returns `(Omega_dd, B_d1 Sigma_11 B_d1^T)`; for `d = 1` the signal
/// part is zero.
pub fn lan_variance_decomposition(model: &LanModel) -> Result<(f64, f64)> {
    if !model.b().is_lower_triangular() {
        return Err(Error::NotTriangular);
    }
    let d = model.d();
    let omega = model.omega();
    for j in 0..(d - 1) {
        if omega.at(d - 1, j) != 0.0 {
            return Err(Error::Precondition(
                "noise covariance must be diagonal in its last row",
            ));
        }
    }
    let noise = omega.at(d - 1, d - 1);
    if d == 1 {
        return Ok((noise, 0.0));
    }
    let sub = LanModel::new(model.b().leading_block(d - 1)?, omega.leading_block(d - 1)?)?;
    let sigma11 = lan_sigma(&sub)?;
    let mut signal = 0.0;
    for a in 0..(d - 1) {
        for b in 0..(d - 1) {
            signal += model.b().at(d - 1, a) * sigma11.at(a, b) * model.b().at(d - 1, b);
        }
    }
    Ok((noise, signal))
}
