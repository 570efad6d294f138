//! Treks — a directed walk into a target node, a blunt top edge, and a
//! directed walk out to a source node — with bounded enumeration in
//! canonical order, trek weights, per-trek series terms, and the
//! self-loop placement count used by the general expansion.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::MixedGraph;
use crate::matrix::DenseMatrix;
use crate::num;

/// A trek from node `i` to node `j`: a left directed walk written
/// target-first (`[i, ..., i0]`, each consecutive pair `(a, b)` backed
/// by a directed edge `b -> a`), a blunt top edge `(i0, j0)`, and a
/// right directed walk written source-first (`[j0, ..., j]`, each
/// consecutive pair `(a, b)` backed by a directed edge `a -> b`).
///
/// Node indices are 0-based throughout the library; [`Trek::render`]
/// converts to the 1-based convention used in reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trek {
    left: Vec<usize>,
    right: Vec<usize>,
}

/// A trek whose sides traverse no directed self-loops. The type does
/// not enforce this; enumeration over a base graph produces only base
/// treks, and the self-loop machinery ([`rho`], the D coefficient)
/// assumes it.
pub type BaseTrek = Trek;

impl Trek {
    /// Builds a trek from its two node sequences; both must be
    /// non-empty (a length-0 walk is the single node `[v]`).
    pub fn new(left: Vec<usize>, right: Vec<usize>) -> Result<Self> {
        if left.is_empty() || right.is_empty() {
            return Err(Error::Precondition(
                "trek sides must contain at least the endpoint node",
            ));
        }
        Ok(Trek { left, right })
    }

    /// Left walk, target node first.
    pub fn left(&self) -> &[usize] {
        &self.left
    }

    /// Right walk, blunt-top node first.
    pub fn right(&self) -> &[usize] {
        &self.right
    }

    /// The blunt top edge `(i0, j0)`.
    pub fn top(&self) -> (usize, usize) {
        (*self.left.last().expect("non-empty"), self.right[0])
    }

    /// Number of directed edges on the left side.
    pub fn n(&self) -> usize {
        self.left.len() - 1
    }

    /// Number of directed edges on the right side.
    pub fn m(&self) -> usize {
        self.right.len() - 1
    }

    /// Total number of directed edges, `n + m`.
    pub fn l(&self) -> usize {
        self.n() + self.m()
    }

    /// The reversed trek (from `j` to `i`): sides swap and each side's
    /// node order flips.
    pub fn reversed(&self) -> Trek {
        let mut left: Vec<usize> = self.right.clone();
        left.reverse();
        let mut right: Vec<usize> = self.left.clone();
        right.reverse();
        Trek { left, right }
    }

    /// Report string with 1-based nodes, e.g. `1<-4-o4->3` (the `-o`
    /// marks the blunt top).
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, &v) in self.left.iter().enumerate() {
            if k > 0 {
                s.push_str("<-");
            }
            let _ = write!(s, "{}", v + 1);
        }
        s.push_str("-o");
        for (k, &v) in self.right.iter().enumerate() {
            if k > 0 {
                s.push_str("->");
            }
            let _ = write!(s, "{}", v + 1);
        }
        s
    }

    /// Canonical enumeration order: ascending `l`, then ascending `n`,
    /// then lexicographic on the concatenated node sequence.
    pub fn canonical_cmp(&self, other: &Trek) -> Ordering {
        self.l()
            .cmp(&other.l())
            .then(self.n().cmp(&other.n()))
            .then_with(|| {
                self.left
                    .iter()
                    .chain(&self.right)
                    .cmp(other.left.iter().chain(&other.right))
            })
    }
}

/// Per-node self-loop counts attached to a base trek: `alpha[i]` loops
/// at node `i` on the left side, `beta[i]` on the right side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelfLoopProfile {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
}

impl SelfLoopProfile {
    pub fn new(alpha: Vec<usize>, beta: Vec<usize>) -> Self {
        SelfLoopProfile { alpha, beta }
    }

    /// Total left-side self-loop count.
    pub fn alpha_total(&self) -> usize {
        self.alpha.iter().sum()
    }

    /// Total right-side self-loop count.
    pub fn beta_total(&self) -> usize {
        self.beta.iter().sum()
    }
}

/// Number of ways the profile's self-loops can be placed among the
/// node occurrences of the base trek: for a node occurring `k >= 1`
/// times on a side carrying `a` loops there are `binom(a + k - 1,
/// k - 1)` placements (stars and bars), multiplied over nodes and
/// sides; zero when a side assigns loops to a node absent from it.
///
/// Profile entries beyond the vectors' lengths are treated as zero.
pub fn rho(tau: &BaseTrek, profile: &SelfLoopProfile) -> u128 {
    fn side_count(walk: &[usize], loops: &[usize]) -> u128 {
        let max_node = *walk.iter().max().expect("non-empty side");
        let mut occurrences = vec![0usize; max_node + 1];
        for &v in walk {
            occurrences[v] += 1;
        }
        let mut ways: u128 = 1;
        for (node, &a) in loops.iter().enumerate() {
            if a == 0 {
                continue;
            }
            let k = occurrences.get(node).copied().unwrap_or(0);
            if k == 0 {
                return 0;
            }
            ways *= num::binom_u128(a + k - 1, k - 1);
        }
        ways
    }
    side_count(&tau.left, &profile.alpha) * side_count(&tau.right, &profile.beta)
}

/// Directed walks into `target` with at most `l_max` edges, grouped as
/// `walks[len][start]` = the target-first node sequences of `len`
/// edges whose deepest node is `start`.
fn walks_into(g: &MixedGraph, target: usize, l_max: usize) -> Vec<Vec<Vec<Vec<usize>>>> {
    let d = g.d();
    let mut levels: Vec<Vec<Vec<Vec<usize>>>> = Vec::with_capacity(l_max + 1);
    let mut first: Vec<Vec<Vec<usize>>> = vec![Vec::new(); d];
    first[target].push(vec![target]);
    levels.push(first);
    for len in 0..l_max {
        let mut next: Vec<Vec<Vec<usize>>> = vec![Vec::new(); d];
        for start in 0..d {
            for walk in &levels[len][start] {
                for &u in g.in_neighbors(start) {
                    let mut extended = walk.clone();
                    extended.push(u);
                    next[u].push(extended);
                }
            }
        }
        levels.push(next);
    }
    levels
}

/// All treks from `i` to `j` with `l <= l_max` in the mixed graph `g`
/// (directed self-loops traversable as edges), each exactly once, in
/// canonical order.
pub fn enumerate_treks(g: &MixedGraph, i: usize, j: usize, l_max: usize) -> Result<Vec<Trek>> {
    let d = g.d();
    for node in [i, j] {
        if node >= d {
            return Err(Error::NodeOutOfRange { node, d });
        }
    }
    let left_walks = walks_into(g, i, l_max);
    let right_walks = if i == j {
        None
    } else {
        Some(walks_into(g, j, l_max))
    };
    let right_walks = right_walks.as_ref().unwrap_or(&left_walks);

    // Ordered blunt tops: both orientations of every off-diagonal
    // blunt edge plus each blunt self-loop once.
    let mut tops: Vec<(usize, usize)> = Vec::new();
    for &(a, b, _) in g.blunt_edges() {
        tops.push((a, b));
        if a != b {
            tops.push((b, a));
        }
    }

    let mut treks = Vec::new();
    for &(i0, j0) in &tops {
        for n in 0..=l_max {
            for lw in &left_walks[n][i0] {
                for m in 0..=(l_max - n) {
                    for rw in &right_walks[m][j0] {
                        let mut right = rw.clone();
                        right.reverse();
                        treks.push(Trek {
                            left: lw.clone(),
                            right,
                        });
                    }
                }
            }
        }
    }
    treks.sort_by(Trek::canonical_cmp);
    Ok(treks)
}

/// All base treks from `i` to `j` with `l <= l_max`: the enumeration
/// of [`enumerate_treks`] over the base graph (directed self-loops
/// removed first, so passing a full graph is safe).
pub fn enumerate_base_treks(
    g: &MixedGraph,
    i: usize,
    j: usize,
    l_max: usize,
) -> Result<Vec<BaseTrek>> {
    enumerate_treks(&g.base_graph(), i, j, l_max)
}

/// The trek weight: the blunt top entry of `c` times the drift entry
/// of every directed edge along both sides.
pub fn trek_weight(m: &DenseMatrix, c: &DenseMatrix, tau: &Trek) -> Result<f64> {
    let d = m.rows();
    if !m.is_square() || c.rows() != d || c.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: (d, d),
            found: (c.rows(), c.cols()),
        });
    }
    for &v in tau.left.iter().chain(&tau.right) {
        if v >= d {
            return Err(Error::NodeOutOfRange { node: v, d });
        }
    }
    let mut w = 1.0;
    // Left side, target-first: pair (a, b) is the directed edge b -> a
    // with weight m[a][b].
    for pair in tau.left.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let f = m.at(a, b);
        if f == 0.0 {
            return Err(Error::IncompatibleEdge {
                tail: b,
                head: a,
                blunt: false,
            });
        }
        w *= f;
    }
    let (i0, j0) = tau.top();
    let f = c.at(i0, j0);
    if f == 0.0 {
        return Err(Error::IncompatibleEdge {
            tail: i0,
            head: j0,
            blunt: true,
        });
    }
    w *= f;
    // Right side, source-first: pair (a, b) is the directed edge
    // a -> b with weight m[b][a].
    for pair in tau.right.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let f = m.at(b, a);
        if f == 0.0 {
            return Err(Error::IncompatibleEdge {
                tail: a,
                head: b,
                blunt: false,
            });
        }
        w *= f;
    }
    Ok(w)
}

/// The series term of a base trek when every drift diagonal entry is
/// exactly -1: `2^(-l-1) * binom(l, n) * weight`. The dyadic prefactor
/// is exact for `l` up to 60 and log-space beyond.
pub fn trek_term(m: &DenseMatrix, c: &DenseMatrix, tau: &BaseTrek) -> Result<f64> {
    for node in 0..m.rows() {
        let value = m.at(node, node);
        if value != -1.0 {
            return Err(Error::DiagonalNotMinusOne { node, value });
        }
    }
    let w = trek_weight(m, c, tau)?;
    Ok(num::half_pow_binom(tau.l(), tau.n()) * w)
}

/// Sum of the series terms over all base treks from `i` to `j` with
/// `l <= l_max`, accumulated in canonical order.
///
/// With a unit diagonal (`m_ii = -1` everywhere) each term is the
/// exact dyadic [`trek_term`]. With general diagonals the per-trek
/// self-loop series is evaluated instead (at an internal tolerance of
/// 1e-12), which requires the shifted matrix `M + I` to be a
/// contraction.
pub fn partial_sum(
    m: &DenseMatrix,
    c: &DenseMatrix,
    i: usize,
    j: usize,
    l_max: usize,
) -> Result<f64> {
    let unit_diagonal = m.is_square() && (0..m.rows()).all(|k| m.at(k, k) == -1.0);
    if unit_diagonal {
        let g = MixedGraph::from_matrices(m, c)?;
        let treks = enumerate_base_treks(&g, i, j, l_max)?;
        let mut acc = 0.0;
        for tau in &treks {
            acc += trek_term(m, c, tau)?;
        }
        Ok(acc)
    } else {
        crate::series::sigma_base_trek_series(m, c, i, j, l_max, 1e-12)
    }
}
