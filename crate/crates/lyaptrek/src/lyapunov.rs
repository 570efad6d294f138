//! Ground-truth steady-state covariance: the continuous Lyapunov
//! equation `M S + S M^T + C = 0` solved by Kronecker vectorization,
//! plus a residual checker and a quadrature cross-check of the
//! integral representation `S = int_0^inf e^(tM) C e^(tM^T) dt`.

use alloc::vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::DenseMatrix;
use crate::num;
use crate::stability;

/// Absolute pivot floor when verifying that the diffusion matrix `C`
/// is positive semidefinite.
pub(crate) const C_PSD_FLOOR: f64 = -1e-10;
/// Looser pivot floor for the computed covariance, which carries the
/// solver's rounding error.
const SIGMA_PSD_FLOOR: f64 = -1e-8;

/// Output of [`solve_lyapunov`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// The steady-state covariance, exactly symmetric.
    pub sigma: DenseMatrix,
    /// Frobenius norm of `M S + S M^T + C` for the returned `sigma`.
    pub residual_norm: f64,
    /// Whether the raw linear-solve output had to be symmetrized (true
    /// when any entry pair differed).
    pub symmetrized: bool,
}

pub(crate) fn validate_pair(m: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: (m.rows(), m.rows()),
            found: (m.rows(), m.cols()),
        });
    }
    if c.rows() != m.rows() || c.cols() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: (m.rows(), m.cols()),
            found: (c.rows(), c.cols()),
        });
    }
    for i in 0..c.rows() {
        for j in (i + 1)..c.cols() {
            let delta = c.at(i, j) - c.at(j, i);
            if !(num::abs(delta) <= 1e-12) {
                return Err(Error::AsymmetricC {
                    row: i,
                    col: j,
                    delta,
                });
            }
        }
    }
    c.symmetrize()
}

/// Solves `M S + S M^T + C = 0` for the steady-state covariance `S`.
///
/// The equation is vectorized over the d^2 unknowns (row (i,j) couples
/// `S[k][j]` through `M[i][k]` and `S[i][k]` through `M[j][k]`) and
/// solved densely with partial pivoting — O(d^6), intended for
/// desk-scale d up to about 30.
///
/// Validates that `M` is stable and `C` symmetric positive
/// semidefinite, symmetrizes the solution, and verifies both the
/// residual bound `1e-8 * (1 + |M| |S| + |C|)` (Frobenius norms) and
/// the positive semidefiniteness of the result.
pub fn solve_lyapunov(m: &DenseMatrix, c: &DenseMatrix) -> Result<SolveReport> {
    let c = validate_pair(m, c)?;
    linalg::check_psd(&c, C_PSD_FLOOR)?;
    if !stability::is_stable(m) {
        return Err(Error::NotStable);
    }
    let d = m.rows();
    let n = d * d;
    let mut a = DenseMatrix::zeros(n, n)?;
    let mut rhs = vec![0.0; n];
    for i in 0..d {
        for j in 0..d {
            let row = i * d + j;
            for k in 0..d {
                // d/dt coupling of S[k][j] via M[i][k] and of S[i][k]
                // via M[j][k].
                a[(row, k * d + j)] += m.at(i, k);
                a[(row, i * d + k)] += m.at(j, k);
            }
            rhs[row] = -c.at(i, j);
        }
    }
    let x = linalg::solve_dense(&a, &rhs)?;
    let raw = DenseMatrix::new(d, d, x)?;
    let symmetrized = raw.max_asymmetry() != 0.0;
    let sigma = raw.symmetrize()?;

    let residual_norm = residual(m, &c, &sigma)?;
    let allowed = 1e-8 * (1.0 + m.frobenius_norm() * sigma.frobenius_norm() + c.frobenius_norm());
    if !(residual_norm <= allowed) {
        return Err(Error::SingularSystem);
    }
    linalg::check_psd(&sigma, SIGMA_PSD_FLOOR)?;
    Ok(SolveReport {
        sigma,
        residual_norm,
        symmetrized,
    })
}

/// Frobenius norm of `M S + S M^T + C`; zero exactly when `S` solves
/// the steady-state equation exactly.
pub fn residual(m: &DenseMatrix, c: &DenseMatrix, sigma: &DenseMatrix) -> Result<f64> {
    let ms = m.matmul(sigma)?;
    let smt = sigma.matmul(&m.transpose())?;
    Ok(ms.add(&smt)?.add(c)?.frobenius_norm())
}

/// Matrix exponential by scaling and squaring with a Taylor series:
/// the argument is halved until its Frobenius norm is at most 1/4, the
/// series is summed to relative 1e-16, and the result squared back.
fn expm(a: &DenseMatrix) -> Result<DenseMatrix> {
    let d = a.rows();
    let norm = a.frobenius_norm();
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let b = a.scale(scale);
    let mut sum = DenseMatrix::identity(d)?;
    let mut term = DenseMatrix::identity(d)?;
    for k in 1..200 {
        term = term.matmul(&b)?.scale(1.0 / k as f64);
        sum = sum.add(&term)?;
        if term.frobenius_norm() <= 1e-16 * sum.frobenius_norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum)?;
    }
    Ok(sum)
}

/// Composite-Simpson approximation of `int_0^horizon e^(tM) C e^(tM^T)
/// dt`, the truncated integral representation of the steady-state
/// covariance. With `panels` Simpson panels there are `2 * panels`
/// subintervals; the exponentials advance incrementally by one fixed
/// half-step factor. Converges to [`solve_lyapunov`]'s output as the
/// horizon and panel count grow.
pub fn integral_quadrature(
    m: &DenseMatrix,
    c: &DenseMatrix,
    horizon: f64,
    panels: usize,
) -> Result<DenseMatrix> {
    let c = validate_pair(m, c)?;
    if !(horizon > 0.0) {
        return Err(Error::Precondition("quadrature horizon must be positive"));
    }
    if panels < 8 {
        return Err(Error::Precondition("quadrature needs at least 8 panels"));
    }
    if !stability::is_stable(m) {
        return Err(Error::NotStable);
    }
    let d = m.rows();
    let h = horizon / panels as f64;
    // One multiplicative step per half panel.
    let step = expm(&m.scale(0.5 * h))?;
    let mut e = DenseMatrix::identity(d)?;
    let mut acc = DenseMatrix::zeros(d, d)?;
    let nodes = 2 * panels;
    for k in 0..=nodes {
        let w = if k == 0 || k == nodes {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let f = e.matmul(&c)?.matmul(&e.transpose())?;
        acc = acc.add(&f.scale(w))?;
        if k < nodes {
            e = e.matmul(&step)?;
        }
    }
    Ok(acc.scale(h / 6.0))
}
