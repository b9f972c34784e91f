//! Network graph: incidence matrices, Laplacian, the `Q` matrix and their
//! spectra.
//!
//! Nodes are 0-based internally. Edge columns of `B` follow input order and
//! pair columns of `B_c` follow lexicographic `(i, j)` with `i < j`; in both,
//! the smaller node index carries `+1`.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{symmetric_eigenvalues, Matrix};

/// Relative tolerance for treating an eigenvalue as zero.
pub const ZERO_EIGEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("network needs at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("edge {edge} references node {node}, but the network has {n} nodes")]
    NodeOutOfRange { edge: usize, node: usize, n: usize },
    #[error("edge {edge} is a self-loop at node {node}")]
    SelfLoop { edge: usize, node: usize },
    #[error("edge {edge} duplicates the pair ({i}, {j})")]
    DuplicateEdge { edge: usize, i: usize, j: usize },
    #[error("edge {edge} has non-positive weight {weight}")]
    NonPositiveWeight { edge: usize, weight: f64 },
    #[error("expected {expected} damping coefficients, got {got}")]
    DampingLength { expected: usize, got: usize },
    #[error("damping coefficient d[{node}] = {value} must be positive")]
    NonPositiveDamping { node: usize, value: f64 },
    #[error("disturbance node {0} is out of range")]
    DisturbanceNodeOutOfRange(usize),
    #[error("graph is disconnected; components: {components:?}")]
    Disconnected { components: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("disconnected graph: {zeros} eigenvalues are numerically zero")]
    Disconnected { zeros: usize },
    #[error("matrix has no eigenvalue above the zero tolerance")]
    AllZero,
}

/// An undirected, weighted line between two nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize, weight: f64) -> Self {
        Self { i, j, weight }
    }

    /// Endpoints ordered so that the first carries `+1` in the incidence
    /// column.
    pub fn oriented(&self) -> (usize, usize) {
        if self.i < self.j {
            (self.i, self.j)
        } else {
            (self.j, self.i)
        }
    }

    pub fn connects(&self, a: usize, b: usize) -> bool {
        (self.i == a && self.j == b) || (self.i == b && self.j == a)
    }
}

/// Node count, weighted edges `a_ij`, per-node coefficients `d_i` and the
/// nodes where disturbances enter.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerNetwork {
    n: usize,
    edges: Vec<Edge>,
    damping: Vec<f64>,
    disturbance_nodes: Vec<usize>,
}

impl PowerNetwork {
    /// Validates and builds a network. The graph must be simple and
    /// connected, with positive weights and coefficients.
    pub fn new(
        n: usize,
        edges: Vec<Edge>,
        damping: Vec<f64>,
        disturbance_nodes: Vec<usize>,
    ) -> Result<Self, NetworkError> {
        if n < 2 {
            return Err(NetworkError::TooFewNodes(n));
        }
        let mut seen = BTreeSet::new();
        for (k, e) in edges.iter().enumerate() {
            for node in [e.i, e.j] {
                if node >= n {
                    return Err(NetworkError::NodeOutOfRange { edge: k, node, n });
                }
            }
            if e.i == e.j {
                return Err(NetworkError::SelfLoop { edge: k, node: e.i });
            }
            if !(e.weight > 0.0) || !e.weight.is_finite() {
                return Err(NetworkError::NonPositiveWeight {
                    edge: k,
                    weight: e.weight,
                });
            }
            let (i, j) = e.oriented();
            if !seen.insert((i, j)) {
                return Err(NetworkError::DuplicateEdge { edge: k, i, j });
            }
        }
        if damping.len() != n {
            return Err(NetworkError::DampingLength {
                expected: n,
                got: damping.len(),
            });
        }
        if let Some((node, &value)) = damping
            .iter()
            .enumerate()
            .find(|(_, d)| !(**d > 0.0) || !d.is_finite())
        {
            return Err(NetworkError::NonPositiveDamping { node, value });
        }
        if let Some(&bad) = disturbance_nodes.iter().find(|&&v| v >= n) {
            return Err(NetworkError::DisturbanceNodeOutOfRange(bad));
        }
        let components = connected_components(n, &edges);
        if components.len() > 1 {
            return Err(NetworkError::Disconnected { components });
        }
        Ok(Self {
            n,
            edges,
            damping,
            disturbance_nodes,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn damping(&self) -> &[f64] {
        &self.damping
    }

    pub fn disturbance_nodes(&self) -> &[usize] {
        &self.disturbance_nodes
    }

    /// Sum of all coefficients, `d = eᵀ D e`.
    pub fn total_damping(&self) -> f64 {
        self.damping.iter().sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.weight).collect()
    }

    pub fn min_weight(&self) -> f64 {
        self.edges.iter().fold(f64::INFINITY, |m, e| m.min(e.weight))
    }

    pub fn max_weight(&self) -> f64 {
        self.edges.iter().fold(0.0, |m, e| m.max(e.weight))
    }

    /// `(min_{i≠j} d_i d_j, max_{i≠j} d_i d_j)`.
    pub fn damping_product_range(&self) -> (f64, f64) {
        let mut sorted = self.damping.clone();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        (sorted[0] * sorted[1], sorted[k - 1] * sorted[k - 2])
    }

    /// Index of the edge joining `a` and `b`, if any.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.iter().position(|e| e.connects(a, b))
    }

    /// Same network with different coefficients.
    pub fn with_damping(&self, damping: Vec<f64>) -> Result<Self, NetworkError> {
        Self::new(
            self.n,
            self.edges.clone(),
            damping,
            self.disturbance_nodes.clone(),
        )
    }

    /// Same network with one edge added (or an existing one replaced).
    pub fn with_edge(&self, edge: Edge) -> Result<Self, NetworkError> {
        let mut edges = self.edges.clone();
        match self.edge_index(edge.i, edge.j) {
            Some(k) => edges[k] = edge,
            None => edges.push(edge),
        }
        Self::new(
            self.n,
            edges,
            self.damping.clone(),
            self.disturbance_nodes.clone(),
        )
    }
}

/// Connected components as sorted node lists, ordered by smallest member.
pub fn connected_components(n: usize, edges: &[Edge]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        if e.i < n && e.j < n {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut components = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        label[start] = id;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if label[w] == usize::MAX {
                    label[w] = id;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// Signed incidence matrices of the network (`B`) and of its induced complete
/// graph (`B_c`).
#[derive(Debug, Clone, PartialEq)]
pub struct IncidencePair {
    pub b: Matrix,
    pub b_complete: Matrix,
    /// `(i, j)` with `+1` at `i`, one per column of `B`.
    pub edge_nodes: Vec<(usize, usize)>,
    /// `(i, j)`, `i < j`, one per column of `B_c`.
    pub pair_nodes: Vec<(usize, usize)>,
}

impl IncidencePair {
    pub fn edge_count(&self) -> usize {
        self.edge_nodes.len()
    }

    pub fn pair_count(&self) -> usize {
        self.pair_nodes.len()
    }

    /// `Bᵀ x`: differences across physical edges.
    pub fn edge_differences(&self, x: &[f64]) -> Vec<f64> {
        self.edge_nodes.iter().map(|&(i, j)| x[i] - x[j]).collect()
    }

    /// `B_cᵀ x`: differences across all node pairs.
    pub fn pair_differences(&self, x: &[f64]) -> Vec<f64> {
        self.pair_nodes.iter().map(|&(i, j)| x[i] - x[j]).collect()
    }
}

/// Builds `B` and `B_c`. Connectivity is already guaranteed by
/// [`PowerNetwork::new`].
pub fn build_incidence(net: &PowerNetwork) -> IncidencePair {
    let n = net.n();
    let edge_nodes: Vec<(usize, usize)> = net.edges().iter().map(Edge::oriented).collect();
    let mut b = Matrix::zeros(n, edge_nodes.len());
    for (k, &(i, j)) in edge_nodes.iter().enumerate() {
        b[(i, k)] = 1.0;
        b[(j, k)] = -1.0;
    }
    let pair_nodes: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let mut b_complete = Matrix::zeros(n, pair_nodes.len());
    for (k, &(i, j)) in pair_nodes.iter().enumerate() {
        b_complete[(i, k)] = 1.0;
        b_complete[(j, k)] = -1.0;
    }
    IncidencePair {
        b,
        b_complete,
        edge_nodes,
        pair_nodes,
    }
}

/// Weighted Laplacian `L = B A_v Bᵀ`, assembled edge by edge.
pub fn laplacian(net: &PowerNetwork) -> Matrix {
    let mut l = Matrix::zeros(net.n(), net.n());
    for e in net.edges() {
        l[(e.i, e.i)] += e.weight;
        l[(e.j, e.j)] += e.weight;
        l[(e.i, e.j)] -= e.weight;
        l[(e.j, e.i)] -= e.weight;
    }
    l
}

/// Second-smallest eigenvalue of a Laplacian.
pub fn algebraic_connectivity(l: &Matrix) -> Result<f64, SpectralError> {
    let eig = symmetric_eigenvalues(l);
    let scale = eig.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = ZERO_EIGEN_TOL * scale;
    let zeros = eig.iter().filter(|v| v.abs() <= tol).count();
    if zeros > 1 {
        return Err(SpectralError::Disconnected { zeros });
    }
    if eig.len() < 2 {
        return Err(SpectralError::AllZero);
    }
    Ok(eig[1])
}

/// `Q = A_v Bᵀ D⁻¹ B A_v`, an `|ℰ| × |ℰ|` PSD matrix.
pub fn q_matrix(net: &PowerNetwork, pair: &IncidencePair) -> Matrix {
    let m = pair.edge_count();
    let a = net.weights();
    let d = net.damping();
    let mut q = Matrix::zeros(m, m);
    for k in 0..m {
        for l in k..m {
            let s: f64 = (0..net.n())
                .map(|i| pair.b[(i, k)] * pair.b[(i, l)] / d[i])
                .sum();
            let v = a[k] * a[l] * s;
            q[(k, l)] = v;
            q[(l, k)] = v;
        }
    }
    q
}

/// Smallest eigenvalue above `1e-9 · ‖Q‖₂`.
pub fn smallest_nonzero_eigenvalue(q: &Matrix) -> Result<f64, SpectralError> {
    let eig = symmetric_eigenvalues(q);
    let scale = eig.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = ZERO_EIGEN_TOL * scale;
    eig.into_iter()
        .find(|&v| v > tol)
        .ok_or(SpectralError::AllZero)
}

/// `λ₂(L)` and `λ_s(Q)` of a network.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Spectrum {
    pub lambda2: f64,
    pub lambda_s_q: f64,
}

impl Spectrum {
    pub fn of(net: &PowerNetwork, pair: &IncidencePair) -> Result<Self, SpectralError> {
        Ok(Self {
            lambda2: algebraic_connectivity(&laplacian(net))?,
            lambda_s_q: smallest_nonzero_eigenvalue(&q_matrix(net, pair))?,
        })
    }
}

/// `n` coefficients drawn uniformly from `[lo, hi]` with a seeded ChaCha8
/// stream.
pub fn uniform_damping(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}
