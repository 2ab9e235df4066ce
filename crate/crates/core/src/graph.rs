//! Areal adjacency and neighbor orders.
//!
//! The neighbor order of two locations is their shortest-path distance in the
//! adjacency graph: 1 for neighbors, 2 for locations that share a neighbor,
//! and so on.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Result, SasaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Contiguity {
    #[default]
    Rook,
    Queen,
}

/// Undirected simple graph over locations `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl AdjacencyGraph {
    pub fn empty(n: usize) -> Self {
        AdjacencyGraph {
            n,
            edges: BTreeSet::new(),
        }
    }

    /// Builds a graph from index pairs; duplicates and reversed pairs collapse.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = AdjacencyGraph::empty(n);
        for (a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        for index in [a, b] {
            if index >= self.n {
                return Err(SasaError::UnknownLocation { index, n: self.n });
            }
        }
        if a == b {
            return Err(SasaError::SelfLoop(a));
        }
        self.edges.insert((a.min(b), a.max(b)));
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Relabels vertices: vertex `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> AdjacencyGraph {
        let edges = self.edges.iter().map(|&(a, b)| {
            let (x, y) = (perm[a], perm[b]);
            (x.min(y), x.max(y))
        });
        AdjacencyGraph {
            n: self.n,
            edges: edges.collect(),
        }
    }
}

/// Lattice adjacency in row-major cell order.
pub fn build_grid_adjacency(rows: usize, cols: usize, contiguity: Contiguity) -> Result<AdjacencyGraph> {
    if rows == 0 || cols == 0 {
        return Err(SasaError::param("grid", "rows and cols must be at least 1"));
    }
    let idx = |r: usize, c: usize| r * cols + c;
    let mut g = AdjacencyGraph::empty(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                g.add_edge(idx(r, c), idx(r, c + 1))?;
            }
            if r + 1 < rows {
                g.add_edge(idx(r, c), idx(r + 1, c))?;
                if contiguity == Contiguity::Queen {
                    if c + 1 < cols {
                        g.add_edge(idx(r, c), idx(r + 1, c + 1))?;
                    }
                    if c > 0 {
                        g.add_edge(idx(r, c), idx(r + 1, c - 1))?;
                    }
                }
            }
        }
    }
    Ok(g)
}

/// All-pairs neighbor orders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborOrders {
    n: usize,
    a: Vec<u32>,
    cap: u32,
}

impl NeighborOrders {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.a[i * self.n + j]
    }

    /// Order assigned to pairs with no connecting path.
    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn max_order(&self) -> u32 {
        self.a.iter().copied().max().unwrap_or(0)
    }
}

/// Breadth-first search from every location. Unreachable pairs get order `n`.
pub fn neighbor_orders(graph: &AdjacencyGraph) -> NeighborOrders {
    let n = graph.n();
    let cap = n as u32;
    let adj = graph.neighbors();
    let mut a = vec![cap; n * n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        let row = &mut a[s * n..(s + 1) * n];
        row[s] = 0;
        queue.clear();
        queue.push_back(s);
        let mut seen = vec![false; n];
        seen[s] = true;
        while let Some(u) = queue.pop_front() {
            let du = row[u];
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    row[v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    NeighborOrders { n, a, cap }
}
