use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on row and column sums of a mixing matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Ring,
    Complete,
    Custom,
}

/// Undirected, connected communication graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    n_nodes: usize,
    edges: BTreeSet<(usize, usize)>,
    kind: TopologyKind,
}

impl Topology {
    /// Cycle `0 - 1 - ... - (n-1) - 0`. Two nodes share one edge; one node has none.
    pub fn ring(n: usize) -> Result<Self> {
        let edges = (0..n).filter(|_| n > 1).map(|i| (i, (i + 1) % n));
        Self::build(n, edges, TopologyKind::Ring)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::build(n, edges, TopologyKind::Complete)
    }

    pub fn custom(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::build(n, edges, TopologyKind::Custom)
    }

    fn build(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, kind: TopologyKind) -> Result<Self> {
        if n == 0 {
            return Err(Error::Topology("no nodes".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Topology(format!("edge ({a}, {b}) outside {n} nodes")));
            }
            if a == b {
                return Err(Error::Topology(format!("self-loop at node {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let t = Self {
            n_nodes: n,
            edges: set,
            kind,
        };
        if !t.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(t)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Neighbors of `i`, excluding `i` itself, in increasing order.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n_nodes).filter(|&j| j != i && self.has_edge(i, j)).collect()
    }

    /// `N_i`: neighbors of `i` together with `i`.
    pub fn closed_neighborhood(&self, i: usize) -> Vec<usize> {
        (0..self.n_nodes).filter(|&j| j == i || self.has_edge(i, j)).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_nodes];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Doubly stochastic mixing matrix supported on the graph plus the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(DMatrix<f64>);

impl WeightMatrix {
    /// Wraps `w` after checking nonnegativity and row/column sums.
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::Dimension("mixing matrix is not square".into()));
        }
        let n = w.nrows();
        if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Topology("mixing matrix has a negative entry".into()));
        }
        for i in 0..n {
            let r: f64 = w.row(i).sum();
            let c: f64 = w.column(i).sum();
            if (r - 1.0).abs() > STOCHASTIC_TOL || (c - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Topology(format!("row/column {i} sums to {r}/{c}")));
            }
        }
        Ok(Self(w))
    }

    /// Uniform `1/N` everywhere.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(DMatrix::from_element(n, n, 1.0 / n as f64))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }
}

/// Metropolis-Hastings weights: `1 / (1 + max(deg_i, deg_j))` on edges, with
/// the remaining mass on the diagonal.
pub fn metropolis_weights(topology: &Topology) -> Result<WeightMatrix> {
    if !topology.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = topology.n_nodes();
    let deg: Vec<usize> = (0..n).map(|i| topology.degree(i)).collect();
    let mut w = DMatrix::zeros(n, n);
    for (a, b) in topology.edges() {
        let v = 1.0 / (1 + deg[a].max(deg[b])) as f64;
        w[(a, b)] = v;
        w[(b, a)] = v;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    WeightMatrix::new(w)
}

/// `rho(W - 11^T / N)`, the rate at which plain gossip contracts disagreement.
pub fn spectral_gap(w: &WeightMatrix) -> f64 {
    let n = w.n();
    let deflated = w.matrix() - DMatrix::from_element(n, n, 1.0 / n as f64);
    if deflated == deflated.transpose() {
        deflated
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    } else {
        deflated
            .complex_eigenvalues()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.norm()))
    }
}

/// `max_i ||theta_i - mean||_2`.
pub fn consensus_distance<V: AsRef<[f64]>>(params: &[V]) -> Result<f64> {
    if params.len() < 2 {
        return Err(Error::Empty("consensus distance needs at least two vectors"));
    }
    let mean = mean_vector(params)?;
    Ok(params
        .iter()
        .map(|p| distance(p.as_ref(), &mean))
        .fold(0.0, f64::max))
}

/// Element-wise mean of equally long vectors.
pub fn mean_vector<V: AsRef<[f64]>>(params: &[V]) -> Result<Vec<f64>> {
    let first = params.first().ok_or(Error::Empty("mean of no vectors"))?.as_ref();
    let mut mean = vec![0.0; first.len()];
    for p in params {
        let p = p.as_ref();
        if p.len() != mean.len() {
            return Err(Error::Dimension(format!("vector of length {} among length {}", p.len(), mean.len())));
        }
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    let n = params.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
