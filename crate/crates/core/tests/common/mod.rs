#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use fillorder::elim::ElimState;
use fillorder::env::{observe, AdjacencyMode, Observation};
use fillorder::graph::{Csr, Graph};
use fillorder::policy::{forward, loss, loss_and_grad, Gradients, LossSpec, PolicyConfig, PolicyParams, Sample};
use fillorder::Execution;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Graph on `0..n` with each pair present independently with probability `p`.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut pi: Vec<usize> = (0..n).collect();
    pi.shuffle(rng);
    pi
}

/// `(n, edges)` with `n` in `min_n..=max_n`.
pub fn graph_strategy(min_n: usize, max_n: usize) -> impl Strategy<Value = Graph> {
    (min_n..=max_n).prop_flat_map(|n| {
        let pairs = n * n.saturating_sub(1) / 2;
        (Just(n), proptest::collection::vec(any::<bool>(), pairs)).prop_map(|(n, bits)| {
            let mut edges = Vec::new();
            let mut k = 0;
            for u in 0..n {
                for v in u + 1..n {
                    if bits[k] {
                        edges.push((u, v));
                    }
                    k += 1;
                }
            }
            Graph::from_edges(n, edges).unwrap()
        })
    })
}

pub fn graph_and_perm(min_n: usize, max_n: usize) -> impl Strategy<Value = (Graph, Vec<usize>)> {
    graph_strategy(min_n, max_n).prop_flat_map(|g| {
        let n = g.n();
        (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

/// Fill edges of `pi` by elimination on a dense boolean matrix.
pub fn dense_fill_edges(g: &Graph, pi: &[usize]) -> BTreeSet<(usize, usize)> {
    let n = g.n();
    let mut m = vec![vec![false; n]; n];
    for (u, v) in g.edges() {
        m[u][v] = true;
        m[v][u] = true;
    }
    let mut gone = vec![false; n];
    let mut fill = BTreeSet::new();
    for &v in pi {
        let nb: Vec<usize> = (0..n).filter(|&u| !gone[u] && m[v][u]).collect();
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if !m[a][b] {
                    m[a][b] = true;
                    m[b][a] = true;
                    fill.insert((a.min(b), a.max(b)));
                }
            }
        }
        gone[v] = true;
    }
    fill
}

pub fn cycle(n: usize) -> Graph {
    Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
}

/// Observation after eliminating `prefix` from `g`.
pub fn observation(g: &Graph, prefix: &[usize], masking: bool, adjacency: AdjacencyMode) -> Observation {
    let g = Arc::new(g.clone());
    let csr = Arc::new(Csr::from(g.as_ref()));
    let mut st = ElimState::new(g);
    for &v in prefix {
        st.eliminate(v).unwrap();
    }
    observe(&st, masking, adjacency, &csr)
}

pub struct GradCase {
    pub params: PolicyParams,
    pub observations: Vec<Observation>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub spec: LossSpec,
}

impl GradCase {
    pub fn samples(&self) -> Vec<Sample<'_>> {
        (0..self.actions.len())
            .map(|i| Sample {
                obs: &self.observations[i],
                action: self.actions[i],
                old_log_prob: self.old_log_probs[i],
                advantage: self.advantages[i],
                ret: self.returns[i],
            })
            .collect()
    }
}

/// A random small loss configuration (n <= 6, node_dim <= 4). Old
/// log-probabilities are offset so every ratio sits well inside or well
/// outside the clip range, away from the kinks.
pub fn random_grad_case(seed: u64) -> GradCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = PolicyConfig {
        node_dim: rng.random_range(1..=4),
        policy_sizes: (0..rng.random_range(0..=2)).map(|_| rng.random_range(1..=3)).collect(),
        adjacency: if rng.random_bool(0.5) { AdjacencyMode::Current } else { AdjacencyMode::Original },
        action_masking: rng.random_bool(0.5),
    };
    let mut params = PolicyParams::init(config.clone(), rng.random()).unwrap();
    // move away from the tiny initial score weights so logits vary
    for t in params.tensors_mut() {
        for x in &mut t.data {
            *x += rng.random_range(-0.5..0.5);
        }
    }
    let spec = LossSpec {
        clip_epsilon: 0.2,
        value_coef: rng.random_range(0.1..1.0),
        ent_coef: if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.1) },
    };
    let batch = rng.random_range(1..=3);
    let mut case = GradCase {
        params,
        observations: Vec::new(),
        actions: Vec::new(),
        old_log_probs: Vec::new(),
        advantages: Vec::new(),
        returns: Vec::new(),
        spec,
    };
    for _ in 0..batch {
        let n = rng.random_range(2..=6);
        let g = random_graph(&mut rng, n, 0.5);
        let pi = random_permutation(&mut rng, n);
        let k = rng.random_range(0..n);
        let obs = observation(&g, &pi[..k], config.action_masking, config.adjacency);
        let out = forward(&case.params, &obs).unwrap();
        let allowed: Vec<usize> = (0..n).filter(|&v| obs.action_mask[v]).collect();
        let a = allowed[rng.random_range(0..allowed.len())];
        let offset = match rng.random_range(0..3) {
            0 => rng.random_range(-0.1..0.1),
            1 => rng.random_range(0.4..0.8),
            _ => -rng.random_range(0.4..0.8),
        };
        case.actions.push(a);
        case.old_log_probs.push(out.masked_log_probs[a] + offset);
        case.advantages.push(rng.random_range(-2.0..2.0));
        case.returns.push(rng.random_range(-5.0..1.0));
        case.observations.push(obs);
    }
    case
}

/// Floor for the relative-error denominator. A central difference at
/// `h = 1e-5` carries roundoff of about `eps * |loss| / h ~ 1e-10`, so
/// entries far below this scale (e.g. the exactly-zero score bias gradient)
/// cannot be resolved.
pub const GRAD_FLOOR: f64 = 1e-5;

/// Largest relative difference between the analytic gradient and central
/// differences with step `h`.
pub fn max_grad_rel_error(case: &GradCase, h: f64) -> f64 {
    let samples = case.samples();
    let (_, grads) = loss_and_grad(&case.params, &samples, &case.spec, Execution::Sequential).unwrap();
    max_rel_error_against(case, &grads, h)
}

/// Like [`max_grad_rel_error`] but checks a supplied gradient.
pub fn max_rel_error_against(case: &GradCase, grads: &Gradients, h: f64) -> f64 {
    let samples = case.samples();
    let mut worst: f64 = 0.0;
    for (ti, t) in case.params.tensors().iter().enumerate() {
        for i in 0..t.data.len() {
            let mut plus = case.params.clone();
            plus.tensors_mut()[ti].data[i] += h;
            let mut minus = case.params.clone();
            minus.tensors_mut()[ti].data[i] -= h;
            let lp = loss(&plus, &samples, &case.spec).unwrap().total;
            let lm = loss(&minus, &samples, &case.spec).unwrap().total;
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grads.tensors[ti][i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
            worst = worst.max(rel);
        }
    }
    worst
}
