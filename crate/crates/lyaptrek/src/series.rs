//! Series routes to the steady-state covariance: the rescaled matrix
//! series with a certified tail bound, the per-trek self-loop series
//! coefficient `D`, and the trek expansion for general stable
//! diagonals.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::graph::MixedGraph;
use crate::linalg;
use crate::lyapunov;
use crate::matrix::DenseMatrix;
use crate::num;
use crate::stability;
use crate::trek::{self, BaseTrek};

/// Contraction margin used when rescaling the drift before summing the
/// matrix series: the shifted matrix `s*M + I` is driven to an
/// estimated spectral radius of at most `1 - SERIES_MARGIN`.
const SERIES_MARGIN: f64 = 0.05;
/// Hard cap on matrix-series terms before reporting no convergence.
const SERIES_MAX_TERMS: usize = 100_000;
/// Hard cap on self-loop series levels in [`d_coefficient`].
const D_MAX_LEVELS: usize = 200_000;

/// Output of [`sigma_series`].
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResult {
    /// The accumulated covariance, exactly symmetric by construction.
    pub sigma: DenseMatrix,
    /// Index of the last series term added (0 means only the leading
    /// `C/2` term was needed).
    pub terms_used: usize,
    /// Certified bound on the Frobenius norm of the truncation error;
    /// exactly zero when the shifted drift is nilpotent.
    pub tail_bound: f64,
    /// The contraction-rate estimate `min_q ||L^q||_F^(1/q)` backing
    /// the tail bound (zero in the nilpotent case).
    pub contraction_rate: f64,
    /// The scale `s` applied to reach a contraction; the covariance of
    /// `(s*M, s*C)` equals the covariance of `(M, C)`, so `sigma` needs
    /// no undoing.
    pub scale_applied: f64,
}

/// Sums the covariance series `sum_k T_k` with `T_0 = C'/2` and
/// `T_{k+1} = (L T_k + T_k L^T)/2`, where `(M', C') = s*(M, C)` is the
/// rescaled pair and `L = M' + I`.
///
/// Stops once a certified tail bound drops to `tol` (absolute,
/// Frobenius norm). The bound combines a contraction-rate estimate
/// `r = min_q ||L^q||^(1/q)` with the transient factor
/// `K = max(1, max_{s<q*} ||L^s||/r^s)`, which together give
/// `||L^n|| <= K r^n` for every n by submultiplicativity; the tail
/// after term N is then at most
/// `(K^2 ||C'||/2) * sum_{k>N} (k+1) r^k`. When some power of `L`
/// vanishes exactly the series terminates and the tail is exactly
/// zero.
///
/// Each term is symmetric bitwise (multiplication and addition
/// commute entrywise in IEEE arithmetic), so `sigma` is too.
pub fn sigma_series(m: &DenseMatrix, c: &DenseMatrix, tol: f64) -> Result<SeriesResult> {
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive"));
    }
    let c_sym = lyapunov::validate_pair(m, c)?;
    linalg::check_psd(&c_sym, lyapunov::C_PSD_FLOOR)?;
    let (ms, cs, scale_applied) = stability::rescale_to_contraction(m, &c_sym, SERIES_MARGIN)?;
    let lambda = ms.add_scaled_identity(1.0).expect("square by validation");
    let lambda_t = lambda.transpose();
    let c_norm = cs.frobenius_norm();

    let mut term = cs.scale(0.5);
    let mut sum = term.clone();

    // Renormalized power iteration, kept one step ahead of the partial
    // sum: `ghat` is L^q scaled to unit Frobenius norm and
    // `log_norms[q]` is ln ||L^q||_F (exact norms, accumulated in log
    // space so enormous transients cannot overflow).
    let mut log_norms: Vec<f64> = vec![0.0];
    let mut ghat: Option<DenseMatrix> = None;
    let mut nilpotent_q: Option<usize> = None;
    let mut r_best = f64::INFINITY;
    let mut q_star = 0usize;

    for level in 0..=SERIES_MAX_TERMS {
        while nilpotent_q.is_none() && log_norms.len() <= level + 1 {
            let q = log_norms.len();
            let (product, norm) = match &ghat {
                None => {
                    let nu = lambda.frobenius_norm();
                    (lambda.clone(), nu)
                }
                Some(g) => {
                    let p = g.matmul(&lambda).expect("square by validation");
                    let nu = p.frobenius_norm();
                    (p, nu)
                }
            };
            if norm == 0.0 {
                nilpotent_q = Some(q);
                break;
            }
            let log_norm = match q {
                1 => num::ln(norm),
                _ => log_norms[q - 1] + num::ln(norm),
            };
            ghat = Some(product.scale(1.0 / norm));
            log_norms.push(log_norm);
            let r_q = num::exp(log_norm / q as f64);
            if r_q < r_best {
                r_best = r_q;
                q_star = q;
            }
        }

        if let Some(q0) = nilpotent_q {
            // L^q0 = 0, so every term with level > 2*(q0 - 1) vanishes.
            if level >= 2 * (q0 - 1) {
                return Ok(SeriesResult {
                    sigma: sum,
                    terms_used: level,
                    tail_bound: 0.0,
                    contraction_rate: 0.0,
                    scale_applied,
                });
            }
        } else if r_best < 1.0 {
            let nf = level as f64;
            let geometric = num::powi(r_best, level as i32 + 1)
                * ((nf + 2.0) - (nf + 1.0) * r_best)
                / ((1.0 - r_best) * (1.0 - r_best));
            let pre = 0.5 * c_norm * geometric;
            // K >= 1, so `pre` is a lower bound on the full tail: skip
            // the O(q*) transient factor until a stop is plausible.
            if pre <= tol {
                let ln_r = num::ln(r_best);
                let mut k_factor = 1.0_f64;
                for s in 1..q_star {
                    let v = num::exp(log_norms[s] - s as f64 * ln_r);
                    if v > k_factor {
                        k_factor = v;
                    }
                }
                let tail = k_factor * k_factor * pre;
                if tail <= tol {
                    return Ok(SeriesResult {
                        sigma: sum,
                        terms_used: level,
                        tail_bound: tail,
                        contraction_rate: r_best,
                        scale_applied,
                    });
                }
            }
        }

        if level == SERIES_MAX_TERMS {
            break;
        }
        let a = lambda.matmul(&term).expect("square by validation");
        let b = term.matmul(&lambda_t).expect("square by validation");
        term = a.add(&b).expect("matching dimensions").scale(0.5);
        sum = sum.add(&term).expect("matching dimensions");
    }
    Err(Error::NoConvergence {
        terms: SERIES_MAX_TERMS,
    })
}

/// Advances the complete-homogeneous-symmetric-polynomial prefix row
/// one degree: entering, `prefix[p]` holds `h_k` over the first `p`
/// variables; leaving, it holds `h_{k+1}`, whose full-variable value is
/// appended to `out`.
pub(crate) fn advance_h(prefix: &mut [f64], vars: &[f64], out: &mut Vec<f64>) {
    let mut prev = 0.0;
    for p in 1..=vars.len() {
        let next = prev + vars[p - 1] * prefix[p];
        prefix[p] = next;
        prev = next;
    }
    prefix[0] = 0.0;
    out.push(prev);
}

/// The self-loop series coefficient of a base trek: with `lambda[i] =
/// m_ii + 1`, the number-weighted series
///
/// ```text
/// D = sum over left/right loop profiles (alpha, beta) of
///     2^(-|alpha|-|beta|) * binom(l+|alpha|+|beta|, n+|alpha|)
///     * rho(tau, profile) * prod_i lambda_i^(alpha_i + beta_i)
/// ```
///
/// evaluated by levels `k = |alpha| + |beta|`. Collapsing each level
/// over placements turns the inner sums into complete homogeneous
/// symmetric polynomials of the per-position lambda values of each
/// side, so level `k` costs O(k) given the running rows:
///
/// ```text
/// t_k = sum_{ka+kb=k} 2^(-k) binom(l+k, n+ka) hL_ka hR_kb
/// ```
///
/// The scaled binomial row `2^(l-L) binom(L, j)` advances by a halved
/// Pascal rule (entries stay within `[0, 2^l]`), and the tail after
/// level K is bounded by the geometric envelope
/// `a_k = 2^l binom(k+l+1, l+1) lambda_max^k`, summed in log space.
///
/// Requires every entry of `lambdas` to satisfy `|lambda| < 1` and a
/// positive `tol`; returns the exact binomial `binom(l, n)` when all
/// per-position lambdas vanish.
pub fn d_coefficient(lambdas: &[f64], tau: &BaseTrek, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive"));
    }
    let d = lambdas.len();
    for (node, &value) in lambdas.iter().enumerate() {
        if !(num::abs(value) < 1.0) {
            return Err(Error::LambdaOutOfRange { node, value });
        }
    }
    for &v in tau.left().iter().chain(tau.right()) {
        if v >= d {
            return Err(Error::NodeOutOfRange { node: v, d });
        }
    }
    let l = tau.l();
    let n = tau.n();

    let left_vars: Vec<f64> = tau.left().iter().map(|&v| lambdas[v]).collect();
    let right_vars: Vec<f64> = tau.right().iter().map(|&v| lambdas[v]).collect();
    let lambda_max = left_vars
        .iter()
        .chain(&right_vars)
        .fold(0.0_f64, |acc, &x| acc.max(num::abs(x)));
    if lambda_max == 0.0 {
        return Ok(num::binom_f64(l, n));
    }
    let ln_lambda = num::ln(lambda_max);

    // row[j] = 2^(l-L) * binom(L, j) at the current L = l + k.
    let mut row: Vec<f64> = (0..=l).map(|j| num::binom_f64(l, j)).collect();
    let mut h_left: Vec<f64> = vec![1.0];
    let mut h_right: Vec<f64> = vec![1.0];
    let mut prefix_left: Vec<f64> = vec![1.0; left_vars.len() + 1];
    let mut prefix_right: Vec<f64> = vec![1.0; right_vars.len() + 1];

    let mut total = 0.0_f64;
    for k in 0..=D_MAX_LEVELS {
        let mut t_k = 0.0;
        for ka in 0..=k {
            t_k += row[n + ka] * h_left[ka] * h_right[k - ka];
        }
        total += t_k;

        let kf = k as f64;
        let ratio = lambda_max * (kf + l as f64 + 3.0) / (kf + 2.0);
        if ratio < 1.0 {
            let ln_a = l as f64 * LN_2 + num::ln_binom(k + l + 2, l + 1) + (kf + 1.0) * ln_lambda;
            let tail = num::exp(ln_a) / (1.0 - ratio);
            if tail <= tol {
                return Ok(total);
            }
        }

        if k == D_MAX_LEVELS {
            break;
        }
        row.push(0.0);
        for j in (1..row.len()).rev() {
            row[j] = 0.5 * (row[j - 1] + row[j]);
        }
        row[0] *= 0.5;
        advance_h(&mut prefix_left, &left_vars, &mut h_left);
        advance_h(&mut prefix_right, &right_vars, &mut h_right);
    }
    Err(Error::NoConvergence {
        terms: D_MAX_LEVELS,
    })
}

/// Sum of trek contributions `2^(-l-1) * D(tau) * weight(tau)` over
/// all base treks from `i` to `j` with `l <= l_max`, for drift
/// matrices whose shifted form `M + I` is a contraction.
///
/// With a unit diagonal every `D` collapses to a binomial and the
/// exact dyadic per-trek terms are summed instead. `tol` is split
/// evenly across treks as the per-coefficient series budget.
pub fn sigma_base_trek_series(
    m: &DenseMatrix,
    c: &DenseMatrix,
    i: usize,
    j: usize,
    l_max: usize,
    tol: f64,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive"));
    }
    let g = MixedGraph::from_matrices(m, c)?;
    let d = g.d();
    for node in [i, j] {
        if node >= d {
            return Err(Error::NodeOutOfRange { node, d });
        }
    }
    let shifted = m.add_scaled_identity(1.0).expect("square by validation");
    if !(stability::spectral_radius_estimate(&shifted) < 1.0) {
        return Err(Error::NotStable);
    }
    let treks = trek::enumerate_base_treks(&g, i, j, l_max)?;
    if (0..d).all(|k| m.at(k, k) == -1.0) {
        let mut acc = 0.0;
        for tau in &treks {
            acc += trek::trek_term(m, c, tau)?;
        }
        return Ok(acc);
    }
    let mut lambdas = Vec::with_capacity(d);
    for k in 0..d {
        let value = m.at(k, k) + 1.0;
        if !(num::abs(value) < 1.0) {
            return Err(Error::LambdaOutOfRange { node: k, value });
        }
        lambdas.push(value);
    }
    if treks.is_empty() {
        return Ok(0.0);
    }
    let per_trek_tol = tol / treks.len() as f64;
    let mut acc = 0.0;
    for tau in &treks {
        let omega = trek::trek_weight(m, c, tau)?;
        let dcoef = d_coefficient(&lambdas, tau, per_trek_tol)?;
        acc += num::powi(0.5, tau.l() as i32 + 1) * dcoef * omega;
    }
    Ok(acc)
}
