//! Stability certification of drift matrices without an eigenvalue
//! decomposition: a spectral-radius upper bound from norms of repeated
//! squares, and a contraction rescaling used by the series evaluator.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::num;

/// Smallest scale tried when hunting for a contraction, as a power of
/// two: `2^-60`.
const MIN_SCALE_EXP: i32 = 60;

/// Estimates the spectral radius of `b` from Frobenius norms of
/// repeatedly squared powers: `rho_k = ||B^(2^k)||_F^(1/2^k)`.
///
/// Every iterate satisfies `rho_k >= rho(B)`, so the returned value is
/// always an upper bound on the true spectral radius (it converges to
/// it from above). Iteration stops when two successive estimates agree
/// to a relative `1e-3`, or after 40 squarings. The powers are kept at
/// unit Frobenius norm with the magnitude tracked in log space, so
/// neither overflow nor underflow can occur for finite inputs.
///
/// Returns `0.0` for nilpotent matrices (an exactly zero power) and
/// `+inf` if `b` contains non-finite entries.
pub fn spectral_radius_estimate(b: &DenseMatrix) -> f64 {
    if !b.is_square() || !b.all_finite() {
        return f64::INFINITY;
    }
    let nu0 = b.frobenius_norm();
    if nu0 == 0.0 {
        return 0.0;
    }
    // Invariant: B^(2^k) = exp(log_mag) * bhat with ||bhat||_F = 1.
    let mut bhat = b.scale(1.0 / nu0);
    let mut log_mag = num::ln(nu0);
    let mut prev = f64::INFINITY;
    for k in 1..=40u32 {
        let sq = bhat.matmul(&bhat).expect("square matrix");
        let nu = sq.frobenius_norm();
        if nu == 0.0 {
            // A power of a renormalized matrix vanished exactly, so B
            // itself is nilpotent.
            return 0.0;
        }
        if !nu.is_finite() {
            return f64::INFINITY;
        }
        log_mag = 2.0 * log_mag + num::ln(nu);
        bhat = sq.scale(1.0 / nu);
        let est = num::exp(log_mag / num::powi(2.0, k as i32));
        if prev.is_finite() && num::abs(est - prev) <= 1e-3 * prev.max(f64::MIN_POSITIVE) {
            return est;
        }
        prev = est;
    }
    prev
}

/// Decides whether all eigenvalues of `m` have strictly negative real
/// part.
///
/// Lower-triangular matrices (exact zeros above the diagonal) are
/// decided directly from their diagonal. Otherwise the scaled shift
/// `s*M + I` is tested for a range of dyadic scales `s`: its spectral
/// radius drops below 1 for some small `s` exactly when every
/// eigenvalue of `M` lies in the open left half-plane, and
/// [`spectral_radius_estimate`] is an upper bound, so a certificate
/// `rho(s*M + I) < 1` is sound.
pub fn is_stable(m: &DenseMatrix) -> bool {
    if !m.is_square() || !m.all_finite() {
        return false;
    }
    if m.is_lower_triangular() {
        return (0..m.rows()).all(|i| m.at(i, i) < 0.0);
    }
    let mut s = 1.0;
    for _ in 0..=MIN_SCALE_EXP {
        let shifted = m.scale(s).add_scaled_identity(1.0).expect("square matrix");
        if spectral_radius_estimate(&shifted) < 1.0 {
            return true;
        }
        s *= 0.5;
    }
    false
}

/// Rescales `(m, c)` by the largest dyadic factor `s` in
/// `{1, 1/2, 1/4, ...}` such that `s*M + I` is certified to be a
/// contraction with margin: `rho(s*M + I) <= 1 - margin`.
///
/// Returns `(s*M, s*C, s)`. The steady-state covariance is invariant
/// under this joint rescaling, so downstream consumers may work with
/// the better-conditioned pair. Fails with [`Error::NotStable`] when
/// no scale down to `2^-60` yields a contraction.
pub fn rescale_to_contraction(
    m: &DenseMatrix,
    c: &DenseMatrix,
    margin: f64,
) -> Result<(DenseMatrix, DenseMatrix, f64)> {
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
    let mut s = 1.0;
    for _ in 0..=MIN_SCALE_EXP {
        let shifted = m.scale(s).add_scaled_identity(1.0)?;
        if spectral_radius_estimate(&shifted) <= 1.0 - margin {
            return Ok((m.scale(s), c.scale(s), s));
        }
        s *= 0.5;
    }
    Err(Error::NotStable)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn five_node_drift() -> DenseMatrix {
        mat(&[
            &[-1.0, 0.5, 0.0, 0.2, 0.0],
            &[-1.0, -1.0, 0.2, 0.0, 0.0],
            &[0.0, 0.0, -1.0, 0.5, 0.0],
            &[0.0, 0.0, 0.0, -1.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0, -1.0],
        ])
    }

    #[test]
    fn radius_of_diagonal_matrix() {
        let b = mat(&[&[0.5, 0.0], &[0.0, 0.25]]);
        let r = spectral_radius_estimate(&b);
        assert!(r >= 0.5 && r < 0.5 * 1.003, "r = {r}");
    }

    #[test]
    fn radius_of_antidiagonal_matrix_is_three() {
        // Eigenvalues +-3; the norm sequence converges from above.
        let b = mat(&[&[0.0, 9.0], &[1.0, 0.0]]);
        let r = spectral_radius_estimate(&b);
        assert!(r >= 3.0 && r < 3.01, "r = {r}");
    }

    #[test]
    fn radius_of_nilpotent_matrix_is_zero() {
        let b = mat(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert_eq!(spectral_radius_estimate(&b), 0.0);
    }

    #[test]
    fn radius_of_scalar_matrix() {
        let b = mat(&[&[-2.5]]);
        let r = spectral_radius_estimate(&b);
        assert!((r - 2.5).abs() < 1e-6, "r = {r}");
    }

    #[test]
    fn radius_of_nonfinite_matrix_is_infinite() {
        let b = mat(&[&[f64::NAN]]);
        assert_eq!(spectral_radius_estimate(&b), f64::INFINITY);
    }

    #[test]
    fn triangular_stability_reads_the_diagonal() {
        assert!(is_stable(&mat(&[&[-1.0, 0.0], &[5.0, -2.0]])));
        assert!(!is_stable(&mat(&[&[1.0, 0.0], &[5.0, -2.0]])));
        assert!(!is_stable(&mat(&[&[0.0, 0.0], &[5.0, -2.0]])));
    }

    #[test]
    fn rotation_is_not_stable_but_damped_rotation_is() {
        // Eigenvalues +-i: marginally stable, rejected.
        assert!(!is_stable(&mat(&[&[0.0, 1.0], &[-1.0, 0.0]])));
        // Eigenvalues 0.1 +- i: unstable.
        assert!(!is_stable(&mat(&[&[0.1, 1.0], &[-1.0, 0.1]])));
        // Eigenvalues -0.1 +- i: stable, needs a small scale.
        assert!(is_stable(&mat(&[&[-0.1, 1.0], &[-1.0, -0.1]])));
    }

    #[test]
    fn five_node_drift_is_stable() {
        assert!(is_stable(&five_node_drift()));
    }

    #[test]
    fn rescale_keeps_scale_one_when_already_contracting() {
        let m = five_node_drift();
        let c = DenseMatrix::identity(5).unwrap();
        let (ms, cs, s) = rescale_to_contraction(&m, &c, 0.05).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(ms, m);
        assert_eq!(cs, c);
    }

    #[test]
    fn rescale_halves_until_contracting() {
        let m = mat(&[&[-3.0, 0.0], &[0.0, -3.0]]);
        let c = DenseMatrix::identity(2).unwrap();
        let (ms, cs, s) = rescale_to_contraction(&m, &c, 0.05).unwrap();
        assert_eq!(s, 0.5);
        assert_eq!(ms, m.scale(0.5));
        assert_eq!(cs, c.scale(0.5));
    }

    #[test]
    fn rescale_rejects_unstable_drift() {
        let m = mat(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let c = DenseMatrix::identity(2).unwrap();
        assert_eq!(rescale_to_contraction(&m, &c, 0.05), Err(Error::NotStable));
    }
}
