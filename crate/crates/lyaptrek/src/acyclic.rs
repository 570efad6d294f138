//! Exact covariance machinery for acyclic drift graphs: topological
//! ordering, finite trek polynomials, closed-form path and factor
//! models, the marginal-variance lower bound, the hypergeometric-style
//! H series, and the extension identity that cross-validates the
//! self-loop coefficients against it.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::graph::MixedGraph;
use crate::linalg;
use crate::lyapunov;
use crate::matrix::DenseMatrix;
use crate::num;
use crate::series;
use crate::trek::{self, BaseTrek, Trek};

/// Hard cap on levels in [`h_function`] and the extension identity.
const H_MAX_LEVELS: usize = 100_000;

/// A topological order of the directed part of a mixed graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologicalOrder {
    /// `permutation[k]` is the node placed at position `k`; every
    /// directed edge runs from an earlier position to a later one.
    pub permutation: Vec<usize>,
}

/// Computes a topological order of the directed edges, ignoring
/// directed self-loops, with the smallest-index node chosen first among
/// the available ones. Fails with [`Error::CyclicGraph`] when a
/// directed cycle (through two or more nodes) exists.
pub fn topological_order(g: &MixedGraph) -> Result<TopologicalOrder> {
    let d = g.d();
    let mut indegree = vec![0usize; d];
    for &(source, target, _) in g.directed_edges() {
        if source != target {
            indegree[target] += 1;
        }
    }
    let mut placed = vec![false; d];
    let mut permutation = Vec::with_capacity(d);
    for _ in 0..d {
        let next = (0..d).find(|&v| !placed[v] && indegree[v] == 0);
        let v = match next {
            Some(v) => v,
            None => return Err(Error::CyclicGraph),
        };
        placed[v] = true;
        permutation.push(v);
        for &(source, target, _) in g.directed_edges() {
            if source == v && target != v {
                indegree[target] -= 1;
            }
        }
    }
    Ok(TopologicalOrder { permutation })
}

fn validate_acyclic_inputs(m: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    let c_sym = lyapunov::validate_pair(m, c)?;
    linalg::check_psd(&c_sym, lyapunov::C_PSD_FLOOR)?;
    Ok(c_sym)
}

/// Exact covariance of an acyclic model whose drift diagonal is
/// exactly `-1`: every entry is the finite sum of dyadic trek terms
/// with `l <= 2(d-1)`, evaluated without any truncation error beyond
/// float rounding. The result is mirrored, hence exactly symmetric.
pub fn sigma_acyclic_unit_diagonal(m: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    let c_sym = validate_acyclic_inputs(m, c)?;
    let d = m.rows();
    for node in 0..d {
        let value = m.at(node, node);
        if value != -1.0 {
            return Err(Error::DiagonalNotMinusOne { node, value });
        }
    }
    let g = MixedGraph::from_matrices(m, &c_sym)?;
    topological_order(&g)?;
    let l_max = 2 * (d - 1);
    let mut sigma = DenseMatrix::zeros(d, d)?;
    for i in 0..d {
        for j in i..d {
            let treks = trek::enumerate_base_treks(&g, i, j, l_max)?;
            let mut acc = 0.0;
            for tau in &treks {
                acc += trek::trek_term(m, &c_sym, tau)?;
            }
            sigma[(i, j)] = acc;
            sigma[(j, i)] = acc;
        }
    }
    Ok(sigma)
}

/// Covariance of an acyclic model with general negative drift
/// diagonal, via the finite trek polynomial: the pair is rescaled by
/// `s = min(1, 1/max(-m_ii))` so every shifted diagonal `s*m_ii + 1`
/// lies in `[0, 1)` (the covariance is scale-invariant), and each of
/// the finitely many base treks contributes its self-loop series
/// coefficient. `tol` is the absolute per-entry budget, split evenly
/// across the treks of an entry.
pub fn sigma_acyclic(m: &DenseMatrix, c: &DenseMatrix, tol: f64) -> Result<DenseMatrix> {
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive"));
    }
    let c_sym = validate_acyclic_inputs(m, c)?;
    let d = m.rows();
    let mut max_neg = 0.0_f64;
    for node in 0..d {
        let value = m.at(node, node);
        if !(value < 0.0) {
            return Err(Error::DiagonalOutOfRange { node, value });
        }
        max_neg = max_neg.max(-value);
    }
    let s = if max_neg > 1.0 { 1.0 / max_neg } else { 1.0 };
    let ms = m.scale(s);
    let cs = c_sym.scale(s);
    let g = MixedGraph::from_matrices(&ms, &cs)?;
    topological_order(&g)?;

    let mut lambdas = Vec::with_capacity(d);
    for node in 0..d {
        lambdas.push(ms.at(node, node) + 1.0);
    }
    if lambdas.iter().all(|&x| x == 0.0) {
        return sigma_acyclic_unit_diagonal(&ms, &cs);
    }

    let l_max = 2 * (d - 1);
    let mut sigma = DenseMatrix::zeros(d, d)?;
    for i in 0..d {
        for j in i..d {
            let treks = trek::enumerate_base_treks(&g, i, j, l_max)?;
            let mut acc = 0.0;
            if !treks.is_empty() {
                let per_trek_tol = tol / treks.len() as f64;
                for tau in &treks {
                    let omega = trek::trek_weight(&ms, &cs, tau)?;
                    let dcoef = series::d_coefficient(&lambdas, tau, per_trek_tol)?;
                    acc += num::powi(0.5, tau.l() as i32 + 1) * dcoef * omega;
                }
            }
            sigma[(i, j)] = acc;
            sigma[(j, i)] = acc;
        }
    }
    Ok(sigma)
}

/// Exact covariance of the path model: nodes `1 -> 2 -> ... -> d` in a
/// chain, every drift diagonal `-1`, every chain edge weighted `zeta`,
/// and isotropic diffusion `C = gamma * I`.
///
/// Entry `(i, j)` (0-based here; the closed form below is 1-based) is
/// the finite trek polynomial with one trek per blunt top `(I0, I0)`:
///
/// ```text
/// Sigma_IJ = sum over top positions I0 = 1..min(I,J) of
///            2^(2*I0 - I - J - 1) * binom(I+J-2*I0, I-I0)
///            * zeta^(I+J-2*I0) * gamma
/// ```
///
/// summed over ascending left-side length, with `gamma` factored out,
/// so integer-valued instances evaluate exactly in floating point.
pub fn path_model_sigma(d: usize, zeta: f64, gamma: f64) -> Result<DenseMatrix> {
    if d == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut sigma = DenseMatrix::zeros(d, d)?;
    for i in 0..d {
        for j in i..d {
            let gap = j - i;
            let mut acc = 0.0;
            for a in 0..=i {
                let b = a + gap;
                let l = a + b;
                acc += num::half_pow_binom(l, a) * num::powi(zeta, l as i32);
            }
            let value = acc * gamma;
            sigma[(i, j)] = value;
            sigma[(j, i)] = value;
        }
    }
    Ok(sigma)
}

/// Exact covariance of the single-factor model: node 1 is the factor
/// with drift diagonal exactly `-1`, nodes `2..d` load on it with
/// `M[i][0] = loadings[i-1]` and drift diagonals `m_diag[i] in [-1, 0)`,
/// and the diffusion is `C = diag(c_diag)` with nonnegative entries.
///
/// Every entry has a rational closed form; with `u_i = m_diag[i]` and
/// `a_i = loadings[i-1]`:
///
/// ```text
/// Sigma_11 = c_1 / 2
/// Sigma_1j = c_1 * a_j / (2 * (1 - u_j))
/// Sigma_ij = c_1 * a_i * a_j * d_ij                    (i != j)
/// Sigma_ii = -c_i / (2 u_i) + c_1 * a_i^2 * d_ii
/// d_ij     = (u_i + u_j - 2) / (2 (1-u_i)(1-u_j)(u_i+u_j))
/// ```
pub fn factor_model_sigma(m_diag: &[f64], loadings: &[f64], c_diag: &[f64]) -> Result<DenseMatrix> {
    let d = m_diag.len();
    if d == 0 {
        return Err(Error::EmptyMatrix);
    }
    if loadings.len() != d - 1 {
        return Err(Error::DimensionMismatch {
            expected: (d - 1, 1),
            found: (loadings.len(), 1),
        });
    }
    if c_diag.len() != d {
        return Err(Error::DimensionMismatch {
            expected: (d, 1),
            found: (c_diag.len(), 1),
        });
    }
    if m_diag[0] != -1.0 {
        return Err(Error::DiagonalOutOfRange {
            node: 0,
            value: m_diag[0],
        });
    }
    for (node, &value) in m_diag.iter().enumerate().skip(1) {
        if !(-1.0..0.0).contains(&value) {
            return Err(Error::DiagonalOutOfRange { node, value });
        }
    }
    for &value in c_diag {
        if !(value >= 0.0) {
            return Err(Error::NotPsd { pivot: value });
        }
    }

    let c1 = c_diag[0];
    let mut sigma = DenseMatrix::zeros(d, d)?;
    sigma[(0, 0)] = c1 / 2.0;
    for i in 1..d {
        let ui = m_diag[i];
        let ai = loadings[i - 1];
        let top = c1 * ai / (2.0 * (1.0 - ui));
        sigma[(0, i)] = top;
        sigma[(i, 0)] = top;
        for j in i..d {
            let uj = m_diag[j];
            let aj = loadings[j - 1];
            let d_ij = (ui + uj - 2.0) / (2.0 * (1.0 - ui) * (1.0 - uj) * (ui + uj));
            let mut value = c1 * ai * aj * d_ij;
            if i == j {
                value += -c_diag[i] / (2.0 * ui);
            }
            sigma[(i, j)] = value;
            sigma[(j, i)] = value;
        }
    }
    Ok(sigma)
}

/// The tetrad contrast `sigma_ij * sigma_kl - sigma_ik * sigma_jl`.
/// Vanishes identically on covariance matrices whose off-diagonal part
/// has rank one (single-factor linear additive noise models); the
/// factor model of the Lyapunov equation violates it.
pub fn tetrad(sigma: &DenseMatrix, i: usize, j: usize, k: usize, l: usize) -> Result<f64> {
    if !sigma.is_square() {
        return Err(Error::DimensionMismatch {
            expected: (sigma.rows(), sigma.rows()),
            found: (sigma.rows(), sigma.cols()),
        });
    }
    let d = sigma.rows();
    for node in [i, j, k, l] {
        if node >= d {
            return Err(Error::NodeOutOfRange { node, d });
        }
    }
    Ok(sigma.at(i, j) * sigma.at(k, l) - sigma.at(i, k) * sigma.at(j, l))
}

/// Lower bound on the last marginal variance of a lower-triangular
/// model: with `M` lower triangular, `m_ii in [-1, 0)`, nonnegative
/// below-diagonal entries, and diagonal PSD `C`,
///
/// ```text
/// Sigma_dd >= -c_dd / (2 m_dd) + (1/2) * M_d1 Sigma_11 M_d1^T
/// ```
///
/// where `Sigma_11` is the steady-state covariance of the leading
/// `(d-1)`-block (computed here by the dense solve) and `M_d1` is the
/// last row of `M` without its diagonal entry.
pub fn variance_lower_bound(m: &DenseMatrix, c: &DenseMatrix) -> Result<f64> {
    let c_sym = lyapunov::validate_pair(m, c)?;
    let d = m.rows();
    if !m.is_lower_triangular() {
        return Err(Error::Precondition("drift matrix must be lower triangular"));
    }
    for i in 0..d {
        for j in 0..i {
            if !(m.at(i, j) >= 0.0) {
                return Err(Error::Precondition(
                    "off-diagonal entries must be nonnegative",
                ));
            }
        }
    }
    for i in 0..d {
        if !(-1.0..0.0).contains(&m.at(i, i)) {
            return Err(Error::Precondition("diagonal entries must lie in [-1, 0)"));
        }
    }
    for i in 0..d {
        for j in 0..d {
            if i != j && c_sym.at(i, j) != 0.0 {
                return Err(Error::Precondition("diffusion matrix must be diagonal"));
            }
        }
    }
    for i in 0..d {
        if !(c_sym.at(i, i) >= 0.0) {
            return Err(Error::Precondition(
                "diffusion diagonal entries must be nonnegative",
            ));
        }
    }

    let direct = -c_sym.at(d - 1, d - 1) / (2.0 * m.at(d - 1, d - 1));
    if d == 1 {
        return Ok(direct);
    }
    let m11 = m.leading_block(d - 1)?;
    let c11 = c_sym.leading_block(d - 1)?;
    let sigma11 = lyapunov::solve_lyapunov(&m11, &c11)?.sigma;
    let mut quad = 0.0;
    for a in 0..(d - 1) {
        for b in 0..(d - 1) {
            quad += m.at(d - 1, a) * sigma11.at(a, b) * m.at(d - 1, b);
        }
    }
    Ok(direct + 0.5 * quad)
}

/// The two-index series
///
/// ```text
/// H(a, b, z) = sum over ka, kb >= 0 of T(ka, kb),
/// T(0, 0)    = (a+b+1)(a+b+2) / ((a+1)(b+1))
/// T(ka, kb+1) = T(ka, kb) * z * (a+b+k+3) / (b+kb+2)   (k = ka+kb)
/// T(ka+1, kb) = T(ka, kb) * z * (a+b+k+3) / (a+ka+2)
/// ```
///
/// evaluated by anti-diagonals with a geometric tail bound
/// `2^(a+b+2)/binom(a+b,a) * (2|z|)^(K+1) / (1-2|z|)` (computed in log
/// space), valid for `|z| < 1/2`. `H(a, b, 0)` returns the leading
/// term exactly; the function is symmetric in `(a, b)`.
pub fn h_function(a: usize, b: usize, z: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive"));
    }
    if !(num::abs(z) < 0.5) {
        return Err(Error::ZOutOfRange { value: z });
    }
    let (af, bf) = (a as f64, b as f64);
    let t00 = (af + bf + 1.0) * (af + bf + 2.0) / ((af + 1.0) * (bf + 1.0));
    if z == 0.0 {
        return Ok(t00);
    }

    let abs_z = num::abs(z);
    let ln_2z = num::ln(2.0 * abs_z);
    // ln of 2^(a+b+2) / binom(a+b, a); the power is folded into log
    // space because a+b can run into the hundreds.
    let ln_front = (af + bf + 2.0) * LN_2 - num::ln_binom(a + b, a);
    let denom = 1.0 - 2.0 * abs_z;

    let mut level: Vec<f64> = vec![t00];
    let mut total = 0.0;
    for k in 0..=H_MAX_LEVELS {
        for &cell in &level {
            total += cell;
        }
        let tail = num::exp(ln_front + (k as f64 + 1.0) * ln_2z) / denom;
        if tail <= tol {
            return Ok(total);
        }
        if k == H_MAX_LEVELS {
            break;
        }
        let kf = k as f64;
        let grow = z * (af + bf + kf + 3.0);
        let mut next = Vec::with_capacity(level.len() + 1);
        for (ka, &cell) in level.iter().enumerate() {
            let kb = k - ka;
            next.push(cell * grow / (bf + kb as f64 + 2.0));
        }
        next.push(level[k] * grow / (af + kf + 2.0));
        level = next;
    }
    Err(Error::NoConvergence {
        terms: H_MAX_LEVELS,
    })
}

/// Numerically checks the extension identity: appending a new node
/// `e = lambdas.len() - 1` to both ends of a base trek `tilde_tau`
/// (producing `left = [e] ++ tilde.left` and `right = tilde.right ++
/// [e]`) relates the extended self-loop coefficient to an H-weighted
/// sum over the original trek:
///
/// ```text
/// D(lambda, extended) = sum_{ka,kb} H(n~+ka, m~+kb, lambda_e / 2)
///                       * binom(l~+k, n~+ka) * hL~[ka] * hR~[kb]
/// ```
///
/// where the `h` rows are complete homogeneous symmetric polynomials
/// of the *halved* per-position values of `tilde_tau`. Returns the
/// pair `(lhs, rhs)`; each side is evaluated to within `tol`, so the
/// two agree within `2*tol` when the identity holds.
///
/// Requires `lambda_e in [0, 1)`, every `tilde_tau` position value in
/// `(-1/2, 1/2)`, and `tilde_tau` to avoid the extension node.
pub fn d_extension_identity_check(
    lambdas: &[f64],
    tilde_tau: &BaseTrek,
    tol: f64,
) -> Result<(f64, f64)> {
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive"));
    }
    let d = lambdas.len();
    if d == 0 {
        return Err(Error::EmptyMatrix);
    }
    let ext = d - 1;
    let lambda_e = lambdas[ext];
    if !(0.0..1.0).contains(&lambda_e) {
        return Err(Error::LambdaOutOfRange {
            node: ext,
            value: lambda_e,
        });
    }
    for &v in tilde_tau.left().iter().chain(tilde_tau.right()) {
        if v >= ext {
            return Err(Error::NodeOutOfRange { node: v, d: ext });
        }
        let value = lambdas[v];
        if !(num::abs(value) < 0.5) {
            return Err(Error::LambdaOutOfRange { node: v, value });
        }
    }

    // Left-hand side: the extended trek's coefficient.
    let mut left = Vec::with_capacity(tilde_tau.left().len() + 1);
    left.push(ext);
    left.extend_from_slice(tilde_tau.left());
    let mut right = Vec::with_capacity(tilde_tau.right().len() + 1);
    right.extend_from_slice(tilde_tau.right());
    right.push(ext);
    let extended = Trek::new(left, right)?;
    let lhs = series::d_coefficient(lambdas, &extended, tol)?;

    // Right-hand side: H-weighted sum over halved position values.
    let l_t = tilde_tau.l();
    let n_t = tilde_tau.n();
    let m_t = tilde_tau.m();
    let z = lambda_e / 2.0;
    let half_left: Vec<f64> = tilde_tau.left().iter().map(|&v| lambdas[v] / 2.0).collect();
    let half_right: Vec<f64> = tilde_tau
        .right()
        .iter()
        .map(|&v| lambdas[v] / 2.0)
        .collect();
    let two_lambda_max = half_left
        .iter()
        .chain(&half_right)
        .fold(0.0_f64, |acc, &x| acc.max(2.0 * num::abs(x)));
    let budget = tol / 2.0;

    if two_lambda_max == 0.0 {
        let weight = num::binom_f64(l_t, n_t);
        let h = h_function(n_t, m_t, z, budget / weight.max(1.0))?;
        return Ok((lhs, h * weight));
    }

    let ln_2l = num::ln(two_lambda_max);
    let ln_front = (2.0 * l_t as f64 + 2.0) * LN_2 - num::ln(1.0 - 2.0 * z);
    let basel = 6.0 / (PI * PI);

    let mut h_left: Vec<f64> = vec![1.0];
    let mut h_right: Vec<f64> = vec![1.0];
    let mut prefix_left: Vec<f64> = vec![1.0; half_left.len() + 1];
    let mut prefix_right: Vec<f64> = vec![1.0; half_right.len() + 1];

    let mut rhs = 0.0_f64;
    for k in 0..=H_MAX_LEVELS {
        let kf = k as f64;
        let level_budget = budget * basel / ((kf + 1.0) * (kf + 1.0) * (kf + 1.0));
        for ka in 0..=k {
            let kb = k - ka;
            let weight = num::binom_f64(l_t + k, n_t + ka) * h_left[ka] * h_right[kb];
            if weight == 0.0 {
                continue;
            }
            let h_tol = level_budget / num::abs(weight).max(1.0);
            let h = h_function(n_t + ka, m_t + kb, z, h_tol)?;
            rhs += h * weight;
        }

        let ratio = two_lambda_max * (kf + l_t as f64 + 3.0) / (kf + 2.0);
        if ratio < 1.0 {
            let ln_a = ln_front + num::ln_binom(k + l_t + 2, l_t + 1) + (kf + 1.0) * ln_2l;
            let tail = num::exp(ln_a) / (1.0 - ratio);
            if tail <= budget {
                return Ok((lhs, rhs));
            }
        }

        if k == H_MAX_LEVELS {
            break;
        }
        series::advance_h(&mut prefix_left, &half_left, &mut h_left);
        series::advance_h(&mut prefix_right, &half_right, &mut h_right);
    }
    Err(Error::NoConvergence {
        terms: H_MAX_LEVELS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::solve_lyapunov;

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn graph(m: &DenseMatrix, c: &DenseMatrix) -> MixedGraph {
        MixedGraph::from_matrices(m, c).unwrap()
    }

    // ---- topological order ----

    #[test]
    fn orders_a_dag_with_smallest_index_first() {
        // Edges 2 -> 0, 2 -> 1, 3 -> 2 (0-based), diag self-loops.
        let m = mat(&[
            &[-1.0, 0.0, 0.7, 0.0],
            &[0.0, -1.0, 0.4, 0.0],
            &[0.0, 0.0, -1.0, 0.5],
            &[0.0, 0.0, 0.0, -1.0],
        ]);
        let c = DenseMatrix::identity(4).unwrap();
        let order = topological_order(&graph(&m, &c)).unwrap();
        assert_eq!(order.permutation, vec![3, 2, 0, 1]);
    }

    #[test]
    fn detects_directed_cycles() {
        let m = mat(&[&[-1.0, 0.5], &[0.5, -1.0]]);
        let c = DenseMatrix::identity(2).unwrap();
        assert_eq!(topological_order(&graph(&m, &c)), Err(Error::CyclicGraph));
        // The five-node example graph is cyclic through 3 -> 5 -> 4 -> 3.
        let m5 = mat(&[
            &[-1.0, 0.5, 0.0, 0.2, 0.0],
            &[-1.0, -1.0, 0.2, 0.0, 0.0],
            &[0.0, 0.0, -1.0, 0.5, 0.0],
            &[0.0, 0.0, 0.0, -1.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0, -1.0],
        ]);
        let c5 = DenseMatrix::identity(5).unwrap();
        assert_eq!(topological_order(&graph(&m5, &c5)), Err(Error::CyclicGraph));
    }

    #[test]
    fn self_loops_do_not_count_as_cycles() {
        let m = mat(&[&[-0.4, 0.0], &[1.0, -0.8]]);
        let c = DenseMatrix::identity(2).unwrap();
        let order = topological_order(&graph(&m, &c)).unwrap();
        assert_eq!(order.permutation, vec![0, 1]);
    }

    // ---- acyclic covariances ----

    #[test]
    fn unit_diagonal_chain_is_exact() {
        let m = mat(&[&[-1.0, 0.0], &[1.0, -1.0]]);
        let c = DenseMatrix::identity(2).unwrap();
        let sigma = sigma_acyclic_unit_diagonal(&m, &c).unwrap();
        assert_eq!(sigma.at(0, 0), 0.5);
        assert_eq!(sigma.at(0, 1), 0.25);
        assert_eq!(sigma.at(1, 0), 0.25);
        assert_eq!(sigma.at(1, 1), 0.75);
        let solve = solve_lyapunov(&m, &c).unwrap();
        assert!(sigma.max_abs_diff(&solve.sigma).unwrap() < 1e-12);
    }

    #[test]
    fn unit_diagonal_route_requires_exact_diagonal() {
        let m = mat(&[&[-0.5, 0.0], &[1.0, -1.0]]);
        let c = DenseMatrix::identity(2).unwrap();
        assert_eq!(
            sigma_acyclic_unit_diagonal(&m, &c),
            Err(Error::DiagonalNotMinusOne {
                node: 0,
                value: -0.5
            })
        );
    }

    #[test]
    fn general_diagonals_match_the_dense_solve() {
        let m = mat(&[&[-0.5, 0.0, 0.0], &[0.8, -0.4, 0.0], &[0.3, -0.6, -0.9]]);
        let c = mat(&[&[0.3, 0.0, 0.0], &[0.0, 0.7, 0.0], &[0.0, 0.0, 1.1]]);
        let sigma = sigma_acyclic(&m, &c, 1e-12).unwrap();
        let solve = solve_lyapunov(&m, &c).unwrap();
        assert!(
            sigma.max_abs_diff(&solve.sigma).unwrap() < 1e-10,
            "gap {}",
            sigma.max_abs_diff(&solve.sigma).unwrap()
        );
        assert_eq!(sigma.max_asymmetry(), 0.0);
    }

    #[test]
    fn steep_diagonals_are_rescaled_internally() {
        let m = mat(&[&[-2.0, 0.0], &[1.5, -1.2]]);
        let c = DenseMatrix::identity(2).unwrap();
        let sigma = sigma_acyclic(&m, &c, 1e-12).unwrap();
        let solve = solve_lyapunov(&m, &c).unwrap();
        assert!(sigma.max_abs_diff(&solve.sigma).unwrap() < 1e-10);
    }

    #[test]
    fn equal_steep_diagonals_collapse_to_the_exact_route() {
        let m = mat(&[&[-4.0, 0.0], &[2.0, -4.0]]);
        let c = DenseMatrix::identity(2).unwrap();
        let sigma = sigma_acyclic(&m, &c, 1e-12).unwrap();
        let solve = solve_lyapunov(&m, &c).unwrap();
        assert!(sigma.max_abs_diff(&solve.sigma).unwrap() < 1e-14);
    }

    #[test]
    fn acyclic_rejects_nonnegative_diagonals_and_cycles() {
        let c = DenseMatrix::identity(2).unwrap();
        let zero_diag = mat(&[&[0.0, 0.0], &[1.0, -1.0]]);
        assert_eq!(
            sigma_acyclic(&zero_diag, &c, 1e-10),
            Err(Error::DiagonalOutOfRange {
                node: 0,
                value: 0.0
            })
        );
        let cyclic = mat(&[&[-1.0, 0.5], &[0.5, -1.0]]);
        assert_eq!(sigma_acyclic(&cyclic, &c, 1e-10), Err(Error::CyclicGraph));
        assert_eq!(
            sigma_acyclic(&cyclic, &c, 0.0),
            Err(Error::Precondition("tolerance must be positive"))
        );
    }

    // ---- path model ----

    #[test]
    fn path_model_reproduces_the_binomial_square() {
        let sigma = path_model_sigma(5, 2.0, 2.0).unwrap();
        let expected: [[f64; 5]; 5] = [
            [1.0, 1.0, 1.0, 1.0, 1.0],
            [1.0, 3.0, 4.0, 5.0, 6.0],
            [1.0, 4.0, 9.0, 14.0, 20.0],
            [1.0, 5.0, 14.0, 29.0, 49.0],
            [1.0, 6.0, 20.0, 49.0, 99.0],
        ];
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(sigma.at(i, j), expected[i][j], "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn path_model_matches_the_dense_solve() {
        let (d, zeta, gamma) = (6, 0.8, 1.3);
        let sigma = path_model_sigma(d, zeta, gamma).unwrap();
        let mut m = DenseMatrix::zeros(d, d).unwrap();
        let mut c = DenseMatrix::zeros(d, d).unwrap();
        for i in 0..d {
            m[(i, i)] = -1.0;
            c[(i, i)] = gamma;
            if i > 0 {
                m[(i, i - 1)] = zeta;
            }
        }
        let solve = solve_lyapunov(&m, &c).unwrap();
        assert!(sigma.max_abs_diff(&solve.sigma).unwrap() < 1e-12);
    }

    #[test]
    fn path_model_satisfies_its_recursion() {
        let (d, zeta, gamma) = (7, -1.4, 0.9);
        let s = path_model_sigma(d, zeta, gamma).unwrap();
        // Lyapunov stationarity entry by entry: each entry is the
        // half-weighted sum of its two chain predecessors, plus the
        // isotropic noise gamma/2 on the diagonal.
        for i in 1..d {
            for j in 1..d {
                let noise = if i == j { gamma / 2.0 } else { 0.0 };
                let expected = 0.5 * zeta * (s.at(i - 1, j) + s.at(i, j - 1)) + noise;
                assert!(
                    (s.at(i, j) - expected).abs() <= 1e-12 * s.at(i, j).abs().max(1.0),
                    "({i},{j})"
                );
            }
        }
        assert_eq!(s.at(0, 0), gamma / 2.0);
        for j in 1..d {
            let expected = 0.5 * zeta * s.at(0, j - 1);
            assert!((s.at(0, j) - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
        assert!(path_model_sigma(0, 1.0, 1.0) == Err(Error::EmptyMatrix));
    }

    // ---- factor model ----

    #[test]
    fn factor_model_matches_the_dense_solve() {
        let m_diag = [-1.0, -0.7, -0.55, -0.9];
        let loadings = [0.8, -0.6, 1.1];
        let c_diag = [1.0, 0.4, 0.3, 0.6];
        let sigma = factor_model_sigma(&m_diag, &loadings, &c_diag).unwrap();
        let d = 4;
        let mut m = DenseMatrix::zeros(d, d).unwrap();
        let mut c = DenseMatrix::zeros(d, d).unwrap();
        for i in 0..d {
            m[(i, i)] = m_diag[i];
            c[(i, i)] = c_diag[i];
            if i > 0 {
                m[(i, 0)] = loadings[i - 1];
            }
        }
        let solve = solve_lyapunov(&m, &c).unwrap();
        assert!(
            sigma.max_abs_diff(&solve.sigma).unwrap() < 1e-12,
            "gap {}",
            sigma.max_abs_diff(&solve.sigma).unwrap()
        );
    }

    #[test]
    fn factor_model_validates_its_inputs() {
        assert_eq!(
            factor_model_sigma(&[-0.9, -0.5], &[1.0], &[1.0, 1.0]),
            Err(Error::DiagonalOutOfRange {
                node: 0,
                value: -0.9
            })
        );
        assert_eq!(
            factor_model_sigma(&[-1.0, -1.5], &[1.0], &[1.0, 1.0]),
            Err(Error::DiagonalOutOfRange {
                node: 1,
                value: -1.5
            })
        );
        assert_eq!(
            factor_model_sigma(&[-1.0, -0.5], &[1.0, 2.0], &[1.0, 1.0]),
            Err(Error::DimensionMismatch {
                expected: (1, 1),
                found: (2, 1)
            })
        );
        assert_eq!(
            factor_model_sigma(&[-1.0, -0.5], &[1.0], &[1.0, -0.1]),
            Err(Error::NotPsd { pivot: -0.1 })
        );
    }

    #[test]
    fn tetrads_vanish_on_rank_one_but_not_on_the_factor_model() {
        // Rank-one off-diagonal structure: tetrads vanish exactly.
        let u = [1.0, 2.0, 3.0, 4.0];
        let mut rank_one = DenseMatrix::zeros(4, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                rank_one[(i, j)] = u[i] * u[j];
            }
        }
        assert_eq!(tetrad(&rank_one, 0, 1, 2, 3).unwrap(), 0.0);

        let m_diag = [-1.0, -0.6, -0.8, -0.7, -0.9];
        let loadings = [0.9, 1.2, -0.7, 0.5];
        let c_diag = [1.0, 0.3, 0.4, 0.2, 0.5];
        let sigma = factor_model_sigma(&m_diag, &loadings, &c_diag).unwrap();
        let t = tetrad(&sigma, 1, 2, 3, 4).unwrap();
        assert!(t.abs() > 1e-6, "tetrad unexpectedly small: {t}");
        assert_eq!(
            tetrad(&sigma, 0, 1, 2, 9),
            Err(Error::NodeOutOfRange { node: 9, d: 5 })
        );
    }

    // ---- lower bound ----

    #[test]
    fn bound_is_tight_for_the_unit_diagonal_chain() {
        let m = mat(&[&[-1.0, 0.0], &[1.0, -1.0]]);
        let c = DenseMatrix::identity(2).unwrap();
        let bound = variance_lower_bound(&m, &c).unwrap();
        assert_eq!(bound, 0.75);
        let sigma = solve_lyapunov(&m, &c).unwrap().sigma;
        assert!((sigma.at(1, 1) - 0.75).abs() < 1e-14);
    }

    #[test]
    fn bound_stays_below_the_true_variance() {
        let m = mat(&[&[-1.0, 0.0], &[1.0, -0.5]]);
        let c = DenseMatrix::identity(2).unwrap();
        let bound = variance_lower_bound(&m, &c).unwrap();
        let sigma = solve_lyapunov(&m, &c).unwrap().sigma;
        assert!((sigma.at(1, 1) - 5.0 / 3.0).abs() < 1e-12);
        assert!(bound <= sigma.at(1, 1));
        assert!((bound - 1.25).abs() < 1e-14);
        // Single node: the bound equals the variance exactly.
        let m1 = mat(&[&[-0.5]]);
        let c1 = mat(&[&[2.0]]);
        assert_eq!(variance_lower_bound(&m1, &c1).unwrap(), 2.0);
    }

    #[test]
    fn bound_preconditions_are_reported_by_name() {
        let c = DenseMatrix::identity(2).unwrap();
        let upper = mat(&[&[-1.0, 0.3], &[1.0, -1.0]]);
        assert_eq!(
            variance_lower_bound(&upper, &c),
            Err(Error::Precondition("drift matrix must be lower triangular"))
        );
        let negative = mat(&[&[-1.0, 0.0], &[-0.2, -1.0]]);
        assert_eq!(
            variance_lower_bound(&negative, &c),
            Err(Error::Precondition(
                "off-diagonal entries must be nonnegative"
            ))
        );
        let steep = mat(&[&[-1.5, 0.0], &[0.2, -1.0]]);
        assert_eq!(
            variance_lower_bound(&steep, &c),
            Err(Error::Precondition("diagonal entries must lie in [-1, 0)"))
        );
        let m = mat(&[&[-1.0, 0.0], &[0.2, -1.0]]);
        let off_diag_c = mat(&[&[1.0, 0.1], &[0.1, 1.0]]);
        assert_eq!(
            variance_lower_bound(&m, &off_diag_c),
            Err(Error::Precondition("diffusion matrix must be diagonal"))
        );
        let negative_c = mat(&[&[1.0, 0.0], &[0.0, -0.3]]);
        assert_eq!(
            variance_lower_bound(&m, &negative_c),
            Err(Error::Precondition(
                "diffusion diagonal entries must be nonnegative"
            ))
        );
    }

    // ---- H function ----

    /// Direct product-formula oracle for a single cell, independent of
    /// the frontier recurrences. Numerator and denominator factors are
    /// interleaved (there are `k` of each) so deep cells neither
    /// overflow nor underflow on the way to their value.
    fn h_cell(a: usize, b: usize, z: f64, ka: usize, kb: usize) -> f64 {
        let (af, bf) = (a as f64, b as f64);
        let mut t = (af + bf + 1.0) * (af + bf + 2.0) / ((af + 1.0) * (bf + 1.0));
        let k = ka + kb;
        let denominators = (2..=(ka + 1))
            .map(|s| af + s as f64)
            .chain((2..=(kb + 1)).map(|s| bf + s as f64));
        for (s, den) in (3..=(k + 2)).zip(denominators) {
            t *= z * (af + bf + s as f64) / den;
        }
        t
    }

    #[test]
    fn h_matches_closed_forms() {
        assert_eq!(h_function(0, 0, 0.0, 1e-10).unwrap(), 2.0);
        assert_eq!(h_function(2, 3, 0.0, 1e-10).unwrap(), 3.5);
        let h = h_function(0, 0, 0.25, 1e-12).unwrap();
        assert!((h - 16.0 / 3.0).abs() < 1e-11, "{h}");
        // H(0, 0, z) = 4/(1-2z) - 2/(1-z).
        let h4 = h_function(0, 0, 0.4, 1e-12).unwrap();
        assert!((h4 - (4.0 / 0.2 - 2.0 / 0.6)).abs() < 1e-10, "{h4}");
    }

    #[test]
    fn h_matches_the_direct_cell_oracle() {
        for &(a, b, z) in &[(1usize, 2usize, -0.3_f64), (4, 0, 0.2), (3, 3, 0.45)] {
            let mut oracle = 0.0;
            for k in 0..=320 {
                for ka in 0..=k {
                    oracle += h_cell(a, b, z, ka, k - ka);
                }
            }
            let h = h_function(a, b, z, 1e-12).unwrap();
            assert!(
                (h - oracle).abs() <= 1e-9 * oracle.abs().max(1.0),
                "H({a},{b},{z}) = {h} vs {oracle}"
            );
        }
    }

    #[test]
    fn h_is_symmetric_and_validates() {
        let lhs = h_function(3, 5, 0.3, 1e-12).unwrap();
        let rhs = h_function(5, 3, 0.3, 1e-12).unwrap();
        assert!((lhs - rhs).abs() <= 1e-11 * lhs.max(1.0));
        assert_eq!(
            h_function(1, 1, 0.5, 1e-10),
            Err(Error::ZOutOfRange { value: 0.5 })
        );
        assert_eq!(
            h_function(1, 1, -0.7, 1e-10),
            Err(Error::ZOutOfRange { value: -0.7 })
        );
        assert_eq!(
            h_function(1, 1, 0.1, 0.0),
            Err(Error::Precondition("tolerance must be positive"))
        );
    }

    // ---- extension identity ----

    #[test]
    fn extension_identity_is_exact_at_zero_lambdas() {
        let tilde = Trek::new(vec![0, 1], vec![1, 2]).unwrap();
        let lambdas = [0.0, 0.0, 0.0, 0.0];
        let (lhs, rhs) = d_extension_identity_check(&lambdas, &tilde, 1e-10).unwrap();
        assert_eq!(lhs, 6.0);
        assert_eq!(rhs, 6.0);
    }

    #[test]
    fn extension_identity_holds_numerically() {
        let tilde = Trek::new(vec![0, 1], vec![1, 2]).unwrap();
        let lambdas = [0.3, -0.2, 0.35, 0.4];
        let (lhs, rhs) = d_extension_identity_check(&lambdas, &tilde, 1e-10).unwrap();
        assert!(
            (lhs - rhs).abs() <= 2e-10,
            "lhs {lhs} rhs {rhs} gap {}",
            (lhs - rhs).abs()
        );

        // A repeating trek through the same nodes.
        let walk = Trek::new(vec![0, 1, 0], vec![0]).unwrap();
        let lambdas2 = [0.45, -0.3, 0.2];
        let (l2, r2) = d_extension_identity_check(&lambdas2, &walk, 1e-10).unwrap();
        assert!((l2 - r2).abs() <= 2e-10, "lhs {l2} rhs {r2}");
    }

    #[test]
    fn extension_identity_validates_ranges() {
        let tilde = Trek::new(vec![0], vec![0]).unwrap();
        assert_eq!(
            d_extension_identity_check(&[0.3, -0.1], &tilde, 1e-10),
            Err(Error::LambdaOutOfRange {
                node: 1,
                value: -0.1
            })
        );
        assert_eq!(
            d_extension_identity_check(&[0.6, 0.4], &tilde, 1e-10),
            Err(Error::LambdaOutOfRange {
                node: 0,
                value: 0.6
            })
        );
        let touches_extension = Trek::new(vec![1], vec![1]).unwrap();
        assert_eq!(
            d_extension_identity_check(&[0.3, 0.4], &touches_extension, 1e-10),
            Err(Error::NodeOutOfRange { node: 1, d: 1 })
        );
    }
}
