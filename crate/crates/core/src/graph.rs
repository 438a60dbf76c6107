//! Undirected simple graphs: the sparsity structure of a symmetric matrix.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Undirected simple graph on vertices `0..n`.
///
/// Neighbor lists are kept sorted and duplicate free; the adjacency relation
/// is symmetric and loop free.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from an edge iterator. Repeated edges collapse into one;
    /// self-loops and out-of-range endpoints are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Graph::empty(n);
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidVertex {
                    vertex: u.max(v),
                });
            }
            if u == v {
                return Err(Error::Contract(format!("self-loop on vertex {u}")));
            }
            g.add_edge(u, v);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Inserts `{u, v}`; returns `false` if it was already present.
    pub(crate) fn add_edge(&mut self, u: usize, v: usize) -> bool {
        debug_assert_ne!(u, v);
        match self.adj[u].binary_search(&v) {
            Ok(_) => false,
            Err(pos) => {
                self.adj[u].insert(pos, v);
                let pos = self.adj[v].binary_search(&u).unwrap_err();
                self.adj[v].insert(pos, u);
                true
            }
        }
    }

    /// Removes every edge incident to `v`.
    pub(crate) fn isolate(&mut self, v: usize) {
        let nbrs = std::mem::take(&mut self.adj[v]);
        for u in nbrs {
            if let Ok(pos) = self.adj[u].binary_search(&v) {
                self.adj[u].remove(pos);
            }
        }
    }

    /// Edges as `(u, v)` pairs with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| nb.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges().collect()
    }

    /// The graph with vertex `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        crate::elim::validate_permutation(self.n(), perm)?;
        Graph::from_edges(self.n(), self.edges().map(|(u, v)| (perm[u], perm[v])))
    }

    /// Checks symmetry, absence of loops, sortedness and id range.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n();
        for (u, nb) in self.adj.iter().enumerate() {
            if nb.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Contract(format!(
                    "neighbors of {u} are not strictly sorted"
                )));
            }
            for &v in nb {
                if v >= n {
                    return Err(Error::InvalidVertex { vertex: v });
                }
                if v == u {
                    return Err(Error::Contract(format!("self-loop on vertex {u}")));
                }
                if !self.has_edge(v, u) {
                    return Err(Error::Contract(format!("edge ({u},{v}) is not symmetric")));
                }
            }
        }
        Ok(())
    }
}

/// Compressed sparse row snapshot of a graph's adjacency, used for message
/// passing where neighbor lists are only read.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl Csr {
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    pub fn degree(&self, v: usize) -> usize {
        (self.offsets[v + 1] - self.offsets[v]) as usize
    }
}

impl From<&Graph> for Csr {
    fn from(g: &Graph) -> Self {
        let mut offsets = Vec::with_capacity(g.n() + 1);
        let mut targets = Vec::with_capacity(2 * g.num_edges());
        offsets.push(0);
        for v in 0..g.n() {
            targets.extend(g.neighbors(v).iter().map(|&u| u as u32));
            offsets.push(targets.len() as u32);
        }
        Csr { offsets, targets }
    }
}
