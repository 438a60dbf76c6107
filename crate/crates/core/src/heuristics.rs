//! Greedy baselines (minimum degree, minimum fill-in), the shared rollout
//! driver, and the candidate mask combining both rules.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::elim::{ElimState, EliminationOrder};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::par::Execution;
use crate::rng::{self, ChaCha8Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieBreak {
    LowestId,
    /// Uniform choice among tied vertices, from a ChaCha stream keyed by the seed.
    Random(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    MinDegree,
    MinFill,
}

impl Rule {
    fn score(self, state: &ElimState, v: usize) -> usize {
        match self {
            Rule::MinDegree => state.current().degree(v),
            Rule::MinFill => state.fill_count(v),
        }
    }
}

/// Picks the next vertex to eliminate.
pub trait Chooser {
    fn choose(&mut self, state: &ElimState) -> usize;
}

impl<F: FnMut(&ElimState) -> usize> Chooser for F {
    fn choose(&mut self, state: &ElimState) -> usize {
        self(state)
    }
}

/// The per-step rule behind [`mdh_order`] and [`mfillh_order`].
pub struct RuleChooser {
    rule: Rule,
    rng: Option<ChaCha8Rng>,
    ties: Vec<usize>,
}

impl RuleChooser {
    pub fn new(rule: Rule, tie: TieBreak) -> Self {
        RuleChooser {
            rule,
            rng: match tie {
                TieBreak::LowestId => None,
                TieBreak::Random(seed) => Some(rng::seeded(seed)),
            },
            ties: Vec::new(),
        }
    }
}

impl Chooser for RuleChooser {
    fn choose(&mut self, state: &ElimState) -> usize {
        self.ties.clear();
        let mut best = usize::MAX;
        for v in state.remaining_vertices() {
            let s = self.rule.score(state, v);
            if s < best {
                best = s;
                self.ties.clear();
            }
            if s == best {
                self.ties.push(v);
            }
        }
        match &mut self.rng {
            None => self.ties[0],
            Some(rng) => self.ties[rng.random_range(0..self.ties.len())],
        }
    }
}

/// Runs `chooser` until every vertex of `g` is eliminated.
pub fn greedy_rollout<C: Chooser + ?Sized>(chooser: &mut C, g: &Graph) -> Result<EliminationOrder> {
    let mut state = ElimState::new(Arc::new(g.clone()));
    while !state.is_done() {
        let v = chooser.choose(&state);
        if v >= state.n() || state.is_eliminated(v) {
            return Err(Error::Contract(format!(
                "chooser returned vertex {v}, which is out of range or already eliminated"
            )));
        }
        state.eliminate(v)?;
    }
    Ok(EliminationOrder {
        fill_cost: state.cumulative_fill(),
        pi: state.order_so_far().to_vec(),
    })
}

pub fn heuristic_order(g: &Graph, rule: Rule, tie: TieBreak) -> EliminationOrder {
    greedy_rollout(&mut RuleChooser::new(rule, tie), g)
        .expect("rule chooser only returns live vertices")
}

/// Minimum degree ordering.
pub fn mdh_order(g: &Graph, tie: TieBreak) -> EliminationOrder {
    heuristic_order(g, Rule::MinDegree, tie)
}

/// Minimum fill-in ordering.
pub fn mfillh_order(g: &Graph, tie: TieBreak) -> EliminationOrder {
    heuristic_order(g, Rule::MinFill, tie)
}

/// Best of `restarts` random tie-break runs; restart `i` uses stream `i` of
/// `seed`. Ties between restarts go to the lower index.
pub fn best_of_restarts(
    g: &Graph,
    rule: Rule,
    restarts: usize,
    seed: u64,
    exec: Execution,
) -> EliminationOrder {
    let restarts = restarts.max(1);
    let runs = exec.map_range(restarts, |i| {
        let chooser = RuleChooser {
            rule,
            rng: Some(rng::stream(seed, i as u64)),
            ties: Vec::new(),
        };
        let mut chooser = chooser;
        greedy_rollout(&mut chooser, g).expect("rule chooser only returns live vertices")
    });
    runs.into_iter()
        .min_by_key(|o| o.fill_cost)
        .expect("at least one restart")
}

/// Vertices that currently have minimum degree or minimum fill.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateMask {
    pub allowed: Vec<bool>,
}

impl CandidateMask {
    pub fn count(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }

    pub fn allowed_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.allowed.iter().enumerate().filter(|(_, &a)| a).map(|(v, _)| v)
    }
}

/// Current fill score of every vertex (0 for eliminated ones).
pub fn fill_scores(state: &ElimState) -> Vec<usize> {
    (0..state.n())
        .map(|v| if state.is_eliminated(v) { 0 } else { state.fill_count(v) })
        .collect()
}

pub fn candidate_mask(state: &ElimState) -> Result<CandidateMask> {
    let fills = fill_scores(state);
    candidate_mask_with_fills(state, &fills)
}

/// [`candidate_mask`] reusing precomputed [`fill_scores`].
pub fn candidate_mask_with_fills(state: &ElimState, fills: &[usize]) -> Result<CandidateMask> {
    if state.is_done() {
        return Err(Error::NoVertices);
    }
    let g = state.current();
    let mut min_deg = usize::MAX;
    let mut min_fill = usize::MAX;
    for v in state.remaining_vertices() {
        min_deg = min_deg.min(g.degree(v));
        min_fill = min_fill.min(fills[v]);
    }
    let allowed = (0..state.n())
        .map(|v| !state.is_eliminated(v) && (g.degree(v) == min_deg || fills[v] == min_fill))
        .collect();
    Ok(CandidateMask { allowed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star3() -> Graph {
        Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap()
    }

    fn cycle(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    fn arrow5() -> Graph {
        Graph::from_edges(5, [(0, 1), (0, 3), (0, 4), (2, 3)]).unwrap()
    }

    #[test]
    fn mdh_on_star_eliminates_leaves_first() {
        let o = mdh_order(&star3(), TieBreak::LowestId);
        assert_eq!(o.pi, vec![1, 2, 0, 3]);
        assert_eq!(o.fill_cost, 0);
    }

    #[test]
    fn cycle4_costs_one_under_any_tie_break() {
        for tie in [TieBreak::LowestId, TieBreak::Random(1), TieBreak::Random(99)] {
            assert_eq!(mdh_order(&cycle(4), tie).fill_cost, 1);
            assert_eq!(mfillh_order(&cycle(4), tie).fill_cost, 1);
        }
    }

    #[test]
    fn mfillh_finds_zero_fill_on_chordal_examples() {
        let k4 = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert_eq!(mfillh_order(&k4, TieBreak::LowestId).fill_cost, 0);
        assert_eq!(mfillh_order(&arrow5(), TieBreak::LowestId).fill_cost, 0);
    }

    #[test]
    fn candidate_mask_examples() {
        let m = candidate_mask(&ElimState::from_graph(&cycle(4))).unwrap();
        assert_eq!(m.allowed, vec![true; 4]);
        let m = candidate_mask(&ElimState::from_graph(&star3())).unwrap();
        assert_eq!(m.allowed, vec![false, true, true, true]);
        // degrees 3,1,1,2,1 and fills 3,0,0,1,0
        let m = candidate_mask(&ElimState::from_graph(&arrow5())).unwrap();
        assert_eq!(m.allowed, vec![false, true, true, false, true]);
    }

    #[test]
    fn candidate_mask_excludes_eliminated_and_errors_when_done() {
        let mut s = ElimState::from_graph(&cycle(4));
        s.eliminate(0).unwrap();
        let m = candidate_mask(&s).unwrap();
        assert!(!m.allowed[0]);
        assert!(m.count() >= 1);
        for v in [1, 2, 3] {
            s.eliminate(v).unwrap();
        }
        assert!(matches!(candidate_mask(&s), Err(Error::NoVertices)));
        let empty = ElimState::from_graph(&Graph::empty(0));
        assert!(matches!(candidate_mask(&empty), Err(Error::NoVertices)));
    }

    #[test]
    fn greedy_rollout_with_closures() {
        let p3 = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let mut lowest = |s: &ElimState| s.remaining_vertices().next().unwrap();
        let o = greedy_rollout(&mut lowest, &p3).unwrap();
        assert_eq!(o.pi, vec![0, 1, 2]);
        assert_eq!(o.fill_cost, 0);

        let mut bad = |_: &ElimState| 0usize;
        assert!(matches!(greedy_rollout(&mut bad, &p3), Err(Error::Contract(_))));
    }

    #[test]
    fn rule_chooser_reproduces_mdh() {
        let g = cycle(7);
        let mut c = RuleChooser::new(Rule::MinDegree, TieBreak::Random(5));
        let a = greedy_rollout(&mut c, &g).unwrap();
        assert_eq!(a, mdh_order(&g, TieBreak::Random(5)));
    }

    #[test]
    fn seeded_random_mask_rollout_is_reproducible() {
        let g = cycle(9);
        let run = |seed| {
            let mut r = rng::seeded(seed);
            let mut chooser = move |s: &ElimState| {
                let m = candidate_mask(s).unwrap();
                let c: Vec<_> = m.allowed_vertices().collect();
                c[r.random_range(0..c.len())]
            };
            greedy_rollout(&mut chooser, &g).unwrap()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn restarts_are_deterministic_across_execution_modes() {
        let g = crate::gen::gen_grid(4, 4).unwrap();
        let a = best_of_restarts(&g, Rule::MinDegree, 16, 7, Execution::Sequential);
        let b = best_of_restarts(&g, Rule::MinDegree, 16, 7, Execution::Parallel);
        assert_eq!(a, b);
        a.verify(&g).unwrap();
    }
}
