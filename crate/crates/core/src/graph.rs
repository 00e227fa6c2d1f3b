//! Undirected weighted communication graphs and the Laplacian algebra used
//! by the closed-loop analysis.
//!
//! Matrices are dense ([`DenseMatrix`] is a `nalgebra::DMatrix<f64>`); agent
//! counts are desk scale so sparse storage buys nothing.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Tolerance on `|a_ij - a_ji|` accepted by the eigenvalue routines.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Relative rank tolerance: eigenvalues at or below
/// `RANK_TOL * max(1, ||m||)` are treated as zero.
pub const RANK_TOL: f64 = 1e-9;

/// Index of a topology in the finite mode set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mode(pub u32);

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Symmetric nonnegative weight matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    weights: DenseMatrix,
}

impl WeightedGraph {
    /// Graph on `n` vertices with no edges.
    pub fn empty(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGraph(format!(
                "need at least 2 agents, got {n}"
            )));
        }
        Ok(Self {
            weights: DenseMatrix::zeros(n, n),
        })
    }

    /// Builds a graph from 0-based undirected edges `(i, j, w)`.
    /// Repeated edges accumulate their weights.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Self::empty(n)?;
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) out of range for {n} agents"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) has non-positive or non-finite weight {w}"
                )));
            }
            g.weights[(i, j)] += w;
            g.weights[(j, i)] += w;
        }
        Ok(g)
    }

    pub fn from_weights(weights: DenseMatrix) -> Result<Self> {
        let n = weights.nrows();
        if weights.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: weights.ncols(),
            });
        }
        if n < 2 {
            return Err(Error::InvalidGraph(format!(
                "need at least 2 agents, got {n}"
            )));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidGraph(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidGraph(format!("bad weight {w} at ({i}, {j})")));
                }
                if w != weights[(j, i)] {
                    return Err(Error::InvalidGraph(format!(
                        "asymmetric weight at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &DenseMatrix {
        &self.weights
    }

    /// Positive-weight edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.weights[(i, j)];
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Edge-union with weights summed.
    pub fn union(&self, other: &WeightedGraph) -> Result<WeightedGraph> {
        if other.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: other.n(),
            });
        }
        Ok(WeightedGraph {
            weights: &self.weights + &other.weights,
        })
    }

    pub fn scaled(&self, factor: f64) -> Result<WeightedGraph> {
        WeightedGraph::from_weights(&self.weights * factor)
    }
}

/// Finite, nonempty set of topologies sharing one vertex set.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFamily {
    graphs: BTreeMap<Mode, WeightedGraph>,
    n: usize,
}

impl GraphFamily {
    pub fn new(graphs: BTreeMap<Mode, WeightedGraph>) -> Result<Self> {
        let n = match graphs.values().next() {
            Some(g) => g.n(),
            None => return Err(Error::InvalidGraph("graph family is empty".into())),
        };
        if let Some(g) = graphs.values().find(|g| g.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.n(),
            });
        }
        Ok(Self { graphs, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        self.graphs.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn get(&self, mode: Mode) -> Result<&WeightedGraph> {
        self.graphs.get(&mode).ok_or(Error::UnknownMode(mode))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Mode, &WeightedGraph)> + '_ {
        self.graphs.iter().map(|(m, g)| (*m, g))
    }

    /// Largest spectral norm of any mode's Laplacian.
    pub fn max_laplacian_norm(&self) -> f64 {
        self.graphs
            .values()
            .map(|g| spectral_norm(&laplacian(g)))
            .fold(0.0, f64::max)
    }
}

/// `L_ij = -a_ij` off the diagonal, `L_ii = sum_j a_ij`.
pub fn laplacian(g: &WeightedGraph) -> DenseMatrix {
    let n = g.n();
    let mut l = -g.weights.clone();
    for i in 0..n {
        l[(i, i)] = g.weights.row(i).sum();
    }
    l
}

/// Laplacian with every weight `a_ij` multiplied by `b_ij`.
pub fn generalized_laplacian(g: &WeightedGraph, b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = g.n();
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if b.nrows() != n { b.nrows() } else { b.ncols() },
        });
    }
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let ab = g.weights[(i, j)] * b[(i, j)];
            l[(i, j)] = -ab;
            diag += ab;
        }
        l[(i, i)] = diag;
    }
    Ok(l)
}

/// `I - (1/n) 1 1^T`, the orthogonal projector onto `1^perp`.
pub fn centering_matrix(n: usize) -> DenseMatrix {
    let inv = 1.0 / n as f64;
    DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - inv } else { -inv })
}

/// Frobenius norm of the off-diagonal part.
pub fn rho(b: &DenseMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            if i != j {
                acc += b[(i, j)] * b[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Sum of the Laplacians of the listed modes.
pub fn union_laplacian(family: &GraphFamily, subset: &[Mode]) -> Result<DenseMatrix> {
    if subset.is_empty() {
        return Err(Error::InvalidParameter("empty mode subset".into()));
    }
    let mut acc = DenseMatrix::zeros(family.n(), family.n());
    for &m in subset {
        acc += laplacian(family.get(m)?);
    }
    Ok(acc)
}

pub fn is_connected(g: &WeightedGraph) -> bool {
    let n = g.n();
    let mut uf = UnionFind::<usize>::new(n);
    let mut components = n;
    for (i, j, _) in g.edges() {
        if uf.union(i, j) {
            components -= 1;
        }
    }
    components == 1
}

/// Largest singular value.
pub fn spectral_norm(m: &DenseMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

fn check_symmetric(m: &DenseMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Smallest eigenvalue above the rank tolerance. For a connected graph's
/// Laplacian this is the algebraic connectivity.
pub fn sigma_min_positive(m: &DenseMatrix) -> Result<f64> {
    let ev = symmetric_eigenvalues(m)?;
    let norm = ev.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let cutoff = RANK_TOL * norm.max(1.0);
    ev.into_iter()
        .find(|&v| v > cutoff)
        .ok_or(Error::NoPositiveEigenvalue)
}

/// Quadratic form `u^T m u`.
pub fn quad_form(m: &DenseMatrix, u: &[f64]) -> f64 {
    let v = DVector::from_column_slice(u);
    v.dot(&(m * &v))
}
