//! The elimination game.
//!
//! Eliminating a vertex turns its current neighborhood into a clique and then
//! isolates it. The edges created on the way are the fill-in of the ordering.
//! Eliminated vertices stay in the graph as isolated vertices so ids remain
//! stable for anything indexing per-vertex data.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Mutable state of a partially eliminated graph.
#[derive(Clone, Debug)]
pub struct ElimState {
    original: Arc<Graph>,
    current: Graph,
    eliminated: Vec<bool>,
    order: Vec<usize>,
    cumulative_fill: usize,
}

impl ElimState {
    pub fn new(original: Arc<Graph>) -> Self {
        let n = original.n();
        ElimState {
            current: (*original).clone(),
            original,
            eliminated: vec![false; n],
            order: Vec::with_capacity(n),
            cumulative_fill: 0,
        }
    }

    pub fn from_graph(g: &Graph) -> Self {
        Self::new(Arc::new(g.clone()))
    }

    pub fn original(&self) -> &Arc<Graph> {
        &self.original
    }

    pub fn current(&self) -> &Graph {
        &self.current
    }

    pub fn n(&self) -> usize {
        self.current.n()
    }

    pub fn eliminated(&self) -> &[bool] {
        &self.eliminated
    }

    pub fn is_eliminated(&self, v: usize) -> bool {
        self.eliminated[v]
    }

    pub fn order_so_far(&self) -> &[usize] {
        &self.order
    }

    pub fn cumulative_fill(&self) -> usize {
        self.cumulative_fill
    }

    pub fn step_index(&self) -> usize {
        self.order.len()
    }

    pub fn remaining(&self) -> usize {
        self.n() - self.order.len()
    }

    pub fn is_done(&self) -> bool {
        self.remaining() == 0
    }

    /// Non-eliminated vertices in increasing id order.
    pub fn remaining_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&v| !self.eliminated[v])
    }

    fn check_live(&self, v: usize) -> Result<()> {
        if v >= self.n() || self.eliminated[v] {
            Err(Error::InvalidVertex { vertex: v })
        } else {
            Ok(())
        }
    }

    /// Number of fill edges eliminating `v` would add right now.
    pub fn fill_if_eliminated(&self, v: usize) -> Result<usize> {
        self.check_live(v)?;
        Ok(self.fill_count(v))
    }

    pub(crate) fn fill_count(&self, v: usize) -> usize {
        let nb = self.current.neighbors(v);
        let mut missing = 0;
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if !self.current.has_edge(a, b) {
                    missing += 1;
                }
            }
        }
        missing
    }

    /// Eliminates `v` and returns the number of fill edges added.
    pub fn eliminate(&mut self, v: usize) -> Result<usize> {
        self.check_live(v)?;
        let nb = self.current.neighbors(v).to_vec();
        let mut added = 0;
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if self.current.add_edge(a, b) {
                    added += 1;
                }
            }
        }
        self.finish_elimination(v, added);
        Ok(added)
    }

    /// Like [`eliminate`](Self::eliminate), but returns the fill edges
    /// themselves as `(a, b)` pairs with `a < b`.
    pub fn eliminate_with_edges(&mut self, v: usize) -> Result<Vec<(usize, usize)>> {
        self.check_live(v)?;
        let nb = self.current.neighbors(v).to_vec();
        let mut edges = Vec::new();
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if self.current.add_edge(a, b) {
                    edges.push((a, b));
                }
            }
        }
        self.finish_elimination(v, edges.len());
        Ok(edges)
    }

    fn finish_elimination(&mut self, v: usize, added: usize) {
        self.current.isolate(v);
        self.eliminated[v] = true;
        self.order.push(v);
        self.cumulative_fill += added;
    }
}

/// A complete elimination ordering together with the fill it realizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EliminationOrder {
    /// `pi[i]` is the vertex eliminated at step `i`.
    pub pi: Vec<usize>,
    pub fill_cost: usize,
}

impl EliminationOrder {
    /// Re-simulates the ordering on `g` and checks the recorded cost.
    pub fn verify(&self, g: &Graph) -> Result<()> {
        let cost = fill_in_cost(g, &self.pi)?;
        if cost != self.fill_cost {
            return Err(Error::Contract(format!(
                "ordering claims fill {} but re-simulates to {cost}",
                self.fill_cost
            )));
        }
        Ok(())
    }
}

/// Returns the inverse permutation (`rank[v]` = position of `v` in `pi`).
pub fn validate_permutation(n: usize, pi: &[usize]) -> Result<Vec<usize>> {
    if pi.len() != n {
        return Err(Error::InvalidPermutation(format!(
            "length {} does not match {n} vertices",
            pi.len()
        )));
    }
    let mut rank = vec![usize::MAX; n];
    for (i, &v) in pi.iter().enumerate() {
        if v >= n {
            return Err(Error::InvalidPermutation(format!("vertex {v} out of range")));
        }
        if rank[v] != usize::MAX {
            return Err(Error::InvalidPermutation(format!("vertex {v} repeated")));
        }
        rank[v] = i;
    }
    Ok(rank)
}

/// Total fill of eliminating `g` in the order `pi`.
pub fn fill_in_cost(g: &Graph, pi: &[usize]) -> Result<usize> {
    validate_permutation(g.n(), pi)?;
    let mut state = ElimState::from_graph(g);
    for &v in pi {
        state.eliminate(v)?;
    }
    Ok(state.cumulative_fill())
}

/// The fill edge set of `pi`, by simulating the elimination.
pub fn simulated_fill_edges(g: &Graph, pi: &[usize]) -> Result<BTreeSet<(usize, usize)>> {
    validate_permutation(g.n(), pi)?;
    let mut state = ElimState::from_graph(g);
    let mut out = BTreeSet::new();
    for &v in pi {
        out.extend(state.eliminate_with_edges(v)?);
    }
    Ok(out)
}

/// The fill edge set of `pi` from the path characterization: a non-edge
/// `{i, j}` is filled iff `g` has an `i`-`j` path whose interior vertices are
/// all eliminated before both `i` and `j`.
///
/// Runs one search per vertex `u`, walking only through vertices ranked
/// below `u`, so any later-ranked vertex it touches closes a fill path.
/// Never touches [`ElimState`].
pub fn rose_tarjan_fill(g: &Graph, pi: &[usize]) -> Result<BTreeSet<(usize, usize)>> {
    let rank = validate_permutation(g.n(), pi)?;
    let n = g.n();
    let mut out = BTreeSet::new();
    let mut seen = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for u in 0..n {
        seen[u] = u;
        queue.clear();
        queue.push_back(u);
        while let Some(x) = queue.pop_front() {
            for &w in g.neighbors(x) {
                if seen[w] == u {
                    continue;
                }
                seen[w] = u;
                if rank[w] < rank[u] {
                    queue.push_back(w);
                } else if x != u {
                    // reached through an interior ranked below u and w
                    if !g.has_edge(u, w) {
                        out.insert((u.min(w), u.max(w)));
                    }
                }
            }
        }
    }
    Ok(out)
}
