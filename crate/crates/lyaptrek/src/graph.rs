//! Mixed-graph view of a model: directed edges weighted by drift
//! entries and blunt (bidirected) edges weighted by diffusion entries.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::num;

/// The mixed graph induced by a drift matrix `M` and diffusion matrix
/// `C` on nodes `0..d`.
///
/// A directed edge `source -> target` exists when `M[target][source]`
/// is nonzero (the drift entry couples the source's state into the
/// target's dynamics). A blunt edge `a o-o b` exists when `C[a][b]` is
/// nonzero; blunt self-loops (`a == b`) are allowed and correspond to
/// diagonal diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedGraph {
    d: usize,
    /// Directed edges as `(source, target, weight)` with
    /// `weight = M[target][source]`, sorted by `(source, target)`.
    directed: Vec<(usize, usize, f64)>,
    /// Blunt edges as `(a, b, weight)` with `a <= b`, sorted.
    blunt: Vec<(usize, usize, f64)>,
    /// For each node `v`, the ascending list of `u` with `u -> v`.
    in_neighbors: Vec<Vec<usize>>,
}

impl MixedGraph {
    /// Builds the mixed graph of `(m, c)`, checking that both matrices
    /// are square of equal dimension and that `c` is symmetric within
    /// an absolute tolerance of `1e-12`. `c` is symmetrized before
    /// blunt edges are extracted, so tiny asymmetries below the
    /// tolerance do not leak into edge weights.
    pub fn from_matrices(m: &DenseMatrix, c: &DenseMatrix) -> Result<Self> {
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
        let d = m.rows();
        for i in 0..d {
            for j in (i + 1)..d {
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
        let c_sym = c.symmetrize()?;

        let mut directed = Vec::new();
        let mut in_neighbors: Vec<Vec<usize>> = (0..d).map(|_| Vec::new()).collect();
        for source in 0..d {
            for target in 0..d {
                let w = m.at(target, source);
                if w != 0.0 {
                    directed.push((source, target, w));
                    in_neighbors[target].push(source);
                }
            }
        }
        let mut blunt = Vec::new();
        for a in 0..d {
            for b in a..d {
                let w = c_sym.at(a, b);
                if w != 0.0 {
                    blunt.push((a, b, w));
                }
            }
        }
        Ok(Self {
            d,
            directed,
            blunt,
            in_neighbors,
        })
    }

    /// Number of nodes.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Directed edges as `(source, target, weight)`, sorted by
    /// `(source, target)`.
    pub fn directed_edges(&self) -> &[(usize, usize, f64)] {
        &self.directed
    }

    /// Blunt edges as `(a, b, weight)` with `a <= b`, sorted.
    pub fn blunt_edges(&self) -> &[(usize, usize, f64)] {
        &self.blunt
    }

    /// Weight of the directed edge `source -> target`, or 0 if absent.
    pub fn directed_weight(&self, source: usize, target: usize) -> f64 {
        self.directed
            .iter()
            .find(|&&(s, t, _)| s == source && t == target)
            .map_or(0.0, |&(_, _, w)| w)
    }

    /// Weight of the blunt edge between `a` and `b` (order
    /// insensitive), or 0 if absent.
    pub fn blunt_weight(&self, a: usize, b: usize) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        self.blunt
            .iter()
            .find(|&&(x, y, _)| x == lo && y == hi)
            .map_or(0.0, |&(_, _, w)| w)
    }

    /// Ascending list of sources `u` with a directed edge `u -> v`.
    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        &self.in_neighbors[v]
    }

    /// The same graph with directed self-loops removed. Blunt edges
    /// (including blunt self-loops) are kept.
    pub fn base_graph(&self) -> MixedGraph {
        let directed: Vec<(usize, usize, f64)> = self
            .directed
            .iter()
            .copied()
            .filter(|&(s, t, _)| s != t)
            .collect();
        let mut in_neighbors: Vec<Vec<usize>> = (0..self.d).map(|_| Vec::new()).collect();
        for &(s, t, _) in &directed {
            in_neighbors[t].push(s);
        }
        MixedGraph {
            d: self.d,
            directed,
            blunt: self.blunt.clone(),
            in_neighbors,
        }
    }
}
