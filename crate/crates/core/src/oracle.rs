//! Exact minimum fill-in for small graphs.
//!
//! The graph left after eliminating a vertex set `S` does not depend on the
//! order in which `S` was eliminated, so the optimum is a dynamic program
//! over subsets:
//!
//! ```text
//! best(S) = min over v not in S of fill(v | S) + best(S + v),   best(V) = 0
//! ```
//!
//! Subsets and neighborhoods are bitmasks, which caps the instance size.

use crate::elim::{ElimState, EliminationOrder};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const DEFAULT_LIMIT: usize = 18;
/// Hard cap regardless of the caller's limit (memory is `2^n * n * 4` bytes).
pub const MAX_EXACT_N: usize = 22;
pub const MAX_EXHAUSTIVE_N: usize = 8;

/// Per-subset memo: best remaining fill and the vertex achieving it.
struct SubsetMemo {
    best: Vec<u32>,
    choice: Vec<u8>,
}

fn fill_bits(adj: &[u32], v: usize) -> u32 {
    let nb = adj[v];
    let mut missing = 0;
    let mut rest = nb;
    while rest != 0 {
        let a = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        missing += (nb & !adj[a] & !(1 << a)).count_ones();
    }
    missing / 2
}

fn eliminate_bits(adj: &mut [u32], v: usize) {
    let nb = adj[v];
    let mut rest = nb;
    while rest != 0 {
        let a = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        adj[a] = (adj[a] | nb) & !(1 << a) & !(1 << v);
    }
    adj[v] = 0;
}

/// An optimal ordering of `g` (whose `fill_cost` is the minimum fill).
pub fn exact_min_fill(g: &Graph, limit_n: usize) -> Result<EliminationOrder> {
    let n = g.n();
    let limit = limit_n.min(MAX_EXACT_N);
    if n > limit {
        return Err(Error::InstanceTooLarge { n, limit });
    }
    if n == 0 {
        return Ok(EliminationOrder { pi: Vec::new(), fill_cost: 0 });
    }
    let full: usize = (1 << n) - 1;
    let subsets = 1usize << n;

    // Eliminated graphs for every subset, built by peeling off the lowest
    // member of S from the (already computed) graph of S minus it.
    let mut graphs = vec![0u32; subsets * n];
    for (v, row) in graphs[..n].iter_mut().enumerate() {
        *row = g.neighbors(v).iter().fold(0, |m, &u| m | (1 << u));
    }
    for s in 1..subsets {
        let low = s.trailing_zeros() as usize;
        let prev = s & (s - 1);
        let (before, after) = graphs.split_at_mut(s * n);
        let adj = &mut after[..n];
        adj.copy_from_slice(&before[prev * n..prev * n + n]);
        eliminate_bits(adj, low);
    }

    let mut memo = SubsetMemo {
        best: vec![u32::MAX; subsets],
        choice: vec![u8::MAX; subsets],
    };
    memo.best[full] = 0;
    for s in (0..full).rev() {
        let adj = &graphs[s * n..s * n + n];
        let mut best = u32::MAX;
        let mut choice = u8::MAX;
        for v in 0..n {
            if s & (1 << v) != 0 {
                continue;
            }
            let cost = fill_bits(adj, v) + memo.best[s | (1 << v)];
            if cost < best {
                best = cost;
                choice = v as u8;
            }
        }
        memo.best[s] = best;
        memo.choice[s] = choice;
    }

    let mut pi = Vec::with_capacity(n);
    let mut s = 0usize;
    while s != full {
        let v = memo.choice[s] as usize;
        pi.push(v);
        s |= 1 << v;
    }
    Ok(EliminationOrder {
        pi,
        fill_cost: memo.best[0] as usize,
    })
}

/// Minimum fill over all `n!` orderings by direct simulation. Independent of
/// [`exact_min_fill`]; meant as its cross-check.
pub fn exhaustive_min_fill(g: &Graph) -> Result<usize> {
    if g.n() > MAX_EXHAUSTIVE_N {
        return Err(Error::InstanceTooLarge {
            n: g.n(),
            limit: MAX_EXHAUSTIVE_N,
        });
    }
    fn search(state: &ElimState, best: &mut usize) {
        if state.is_done() {
            *best = (*best).min(state.cumulative_fill());
            return;
        }
        for v in state.remaining_vertices() {
            let mut next = state.clone();
            next.eliminate(v).expect("live vertex");
            search(&next, best);
        }
    }
    let mut best = usize::MAX;
    search(&ElimState::from_graph(g), &mut best);
    Ok(if g.n() == 0 { 0 } else { best })
}
