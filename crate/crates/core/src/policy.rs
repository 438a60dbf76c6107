//! Two-layer graph convolutional policy with a per-node score head and a
//! pooled value head.
//!
//! ```text
//! A_hat = (A + I) row-normalized      mean over self and neighbors
//! H1    = tanh(A_hat X  W1)           X: n x 3 features
//! H2    = tanh(A_hat H1 W2)
//! logit = H2 s + c                    one score per node
//! value = MLP(mean of live rows of H2)
//! ```
//!
//! The action distribution is a softmax over the logits of the allowed
//! nodes; masked nodes get log-probability `-inf`. Gradients of the PPO loss
//! are computed by hand in [`loss_and_grad`].

use std::f64::consts::SQRT_2;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{AdjacencyMode, Observation, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::graph::Csr;
use crate::par::Execution;
use crate::rng;

const GCN1: usize = 0;
const GCN2: usize = 1;
const SCORE_W: usize = 2;
const SCORE_B: usize = 3;
const VALUE_BASE: usize = 4;

pub const CHECKPOINT_FORMAT: &str = "fillorder-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub node_dim: usize,
    /// Hidden widths of the value MLP; empty means a linear value head.
    pub policy_sizes: Vec<usize>,
    pub adjacency: AdjacencyMode,
    /// Whether the policy was trained with the candidate mask; evaluation
    /// builds observations the same way.
    pub action_masking: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            node_dim: 32,
            policy_sizes: Vec::new(),
            adjacency: AdjacencyMode::Current,
            action_masking: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor {
            name: name.into(),
            shape,
            data: vec![0.0; len],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    config: PolicyConfig,
    tensors: Vec<Tensor>,
}

fn expected_shapes(cfg: &PolicyConfig) -> Vec<(String, Vec<usize>)> {
    let d = cfg.node_dim;
    let mut out = vec![
        ("gcn1.weight".to_string(), vec![NUM_FEATURES, d]),
        ("gcn2.weight".to_string(), vec![d, d]),
        ("score.weight".to_string(), vec![d]),
        ("score.bias".to_string(), vec![1]),
    ];
    let mut widths = vec![d];
    widths.extend(&cfg.policy_sizes);
    widths.push(1);
    for (k, w) in widths.windows(2).enumerate() {
        out.push((format!("value.{k}.weight"), vec![w[0], w[1]]));
        out.push((format!("value.{k}.bias"), vec![w[1]]));
    }
    out
}

/// Random matrix with orthonormal rows or columns (whichever are fewer), times `gain`.
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> Vec<f64> {
    let (long, short) = (rows.max(cols), rows.min(cols));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = gain * if rows >= cols { basis[c][r] } else { basis[r][c] };
        }
    }
    out
}

impl PolicyParams {
    /// Orthogonal weights, zero biases.
    pub fn init(config: PolicyConfig, seed: u64) -> Result<Self> {
        if config.node_dim == 0 {
            return Err(Error::Config("node_dim must be positive".into()));
        }
        if config.policy_sizes.contains(&0) {
            return Err(Error::Config("policy_sizes entries must be positive".into()));
        }
        let mut rng = rng::seeded(seed);
        let shapes = expected_shapes(&config);
        let value_layers = (shapes.len() - VALUE_BASE) / 2;
        let tensors = shapes
            .into_iter()
            .enumerate()
            .map(|(i, (name, shape))| {
                let mut t = Tensor::zeros(name, shape);
                let gain = match i {
                    GCN1 | GCN2 => Some(1.0),
                    SCORE_W => Some(0.01),
                    _ if i >= VALUE_BASE && (i - VALUE_BASE).is_multiple_of(2) => {
                        let layer = (i - VALUE_BASE) / 2;
                        Some(if layer + 1 == value_layers { 1.0 } else { SQRT_2 })
                    }
                    _ => None,
                };
                if let Some(gain) = gain {
                    let (r, c) = match t.shape.as_slice() {
                        [r, c] => (*r, *c),
                        [r] => (*r, 1),
                        _ => unreachable!(),
                    };
                    t.data = orthogonal(r, c, gain, &mut rng);
                }
                t
            })
            .collect();
        Ok(PolicyParams { config, tensors })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    fn t(&self, i: usize) -> &[f64] {
        &self.tensors[i].data
    }

    fn value_layers(&self) -> usize {
        (self.tensors.len() - VALUE_BASE) / 2
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    pub fn to_json(&self) -> String {
        let file = CheckpointRef {
            format: CHECKPOINT_FORMAT,
            version: CHECKPOINT_VERSION,
            config: &self.config,
            tensors: &self.tensors,
        };
        let mut s = serde_json::to_string(&file).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format tag {:?}", file.format)));
        }
        if file.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", file.version)));
        }
        let shapes = expected_shapes(&file.config);
        if shapes.len() != file.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                file.tensors.len()
            )));
        }
        for ((name, shape), t) in shapes.iter().zip(&file.tensors) {
            let len: usize = shape.iter().product();
            if &t.name != name || &t.shape != shape || t.data.len() != len {
                return Err(Error::Checkpoint(format!(
                    "tensor {:?} {:?} does not match expected {name:?} {shape:?}",
                    t.name, t.shape
                )));
            }
        }
        Ok(PolicyParams {
            config: file.config,
            tensors: file.tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Checkpoint container: a format tag, a version, the architecture config
/// and every tensor as `{name, shape, data}` with row-major data.
#[derive(Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: PolicyConfig,
    tensors: Vec<Tensor>,
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    format: &'a str,
    version: u32,
    config: &'a PolicyConfig,
    tensors: &'a [Tensor],
}

/// Per-tensor gradients, aligned with [`PolicyParams::tensors`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &PolicyParams) -> Self {
        Gradients {
            tensors: params.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.tensors.iter_mut().flatten().for_each(|x| *x *= k);
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().flatten().all(|&x| x == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    pub logits: Vec<f64>,
    /// Log-softmax over allowed nodes; `-inf` elsewhere.
    pub masked_log_probs: Vec<f64>,
    pub value: f64,
}

impl PolicyOutput {
    pub fn probs(&self) -> Vec<f64> {
        self.masked_log_probs.iter().map(|l| l.exp()).collect()
    }

    /// Entropy of the masked distribution.
    pub fn entropy(&self) -> f64 {
        -self
            .masked_log_probs
            .iter()
            .filter(|l| l.is_finite())
            .map(|&l| l.exp() * l)
            .sum::<f64>()
    }
}

// Row-major dense helpers.

/// `a (n x k) * w (k x m)`
fn matmul(a: &[f64], n: usize, k: usize, w: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for (p, &x) in a[i * k..(i + 1) * k].iter().enumerate() {
            if x != 0.0 {
                row.iter_mut().zip(&w[p * m..(p + 1) * m]).for_each(|(o, wv)| *o += x * wv);
            }
        }
    }
    out
}

/// `a^T (k x n) * b (n x m)`, accumulated into `out (k x m)`.
fn matmul_at_b_acc(a: &[f64], n: usize, k: usize, b: &[f64], m: usize, out: &mut [f64]) {
    for i in 0..n {
        let brow = &b[i * m..(i + 1) * m];
        for (p, &x) in a[i * k..(i + 1) * k].iter().enumerate() {
            if x != 0.0 {
                out[p * m..(p + 1) * m].iter_mut().zip(brow).for_each(|(o, y)| *o += x * y);
            }
        }
    }
}

/// `g (n x m) * w^T (m x k)` where `w` is `k x m`.
fn matmul_a_bt(g: &[f64], n: usize, m: usize, w: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * k];
    for i in 0..n {
        let grow = &g[i * m..(i + 1) * m];
        for p in 0..k {
            out[i * k + p] = grow.iter().zip(&w[p * m..(p + 1) * m]).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// Mean over self and neighbors: `A_hat x`.
fn aggregate(adj: &Csr, x: &[f64], width: usize) -> Vec<f64> {
    let n = adj.n();
    let mut out = x.to_vec();
    for i in 0..n {
        for &j in adj.neighbors(i) {
            let j = j as usize;
            for c in 0..width {
                out[i * width + c] += x[j * width + c];
            }
        }
        let inv = 1.0 / (adj.degree(i) + 1) as f64;
        out[i * width..(i + 1) * width].iter_mut().for_each(|v| *v *= inv);
    }
    out
}

/// `A_hat^T g`, using symmetry of the underlying adjacency.
fn aggregate_transpose(adj: &Csr, g: &[f64], width: usize) -> Vec<f64> {
    let n = adj.n();
    let scaled: Vec<f64> = (0..n)
        .flat_map(|i| {
            let inv = 1.0 / (adj.degree(i) + 1) as f64;
            g[i * width..(i + 1) * width].iter().map(move |v| v * inv)
        })
        .collect();
    let mut out = scaled.clone();
    for j in 0..n {
        for &i in adj.neighbors(j) {
            let i = i as usize;
            for c in 0..width {
                out[j * width + c] += scaled[i * width + c];
            }
        }
    }
    out
}

/// Intermediate values of one forward pass.
struct Trace {
    n: usize,
    ax: Vec<f64>,
    h1: Vec<f64>,
    ah1: Vec<f64>,
    h2: Vec<f64>,
    live: Vec<usize>,
    /// Inputs to each value layer (first is the pooled embedding).
    mlp_inputs: Vec<Vec<f64>>,
    out: PolicyOutput,
}

fn check_shapes(obs: &Observation) -> Result<()> {
    let n = obs.n();
    if obs.adjacency.n() != n || obs.action_mask.len() != n {
        return Err(Error::Config(format!(
            "observation shapes disagree: {} feature rows, {} adjacency rows, {} mask entries",
            n,
            obs.adjacency.n(),
            obs.action_mask.len()
        )));
    }
    Ok(())
}

fn masked_log_softmax(logits: &[f64], mask: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![f64::NEG_INFINITY; logits.len()];
    }
    let sum: f64 = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&z, _)| (z - max).exp())
        .sum();
    let lse = max + sum.ln();
    logits
        .iter()
        .zip(mask)
        .map(|(&z, &m)| if m { z - lse } else { f64::NEG_INFINITY })
        .collect()
}

fn forward_trace(params: &PolicyParams, obs: &Observation) -> Result<Trace> {
    check_shapes(obs)?;
    let n = obs.n();
    let d = params.config.node_dim;
    let adj = &*obs.adjacency;
    let x: Vec<f64> = obs.features.iter().flatten().copied().collect();

    let ax = aggregate(adj, &x, NUM_FEATURES);
    let mut h1 = matmul(&ax, n, NUM_FEATURES, params.t(GCN1), d);
    h1.iter_mut().for_each(|v| *v = v.tanh());
    let ah1 = aggregate(adj, &h1, d);
    let mut h2 = matmul(&ah1, n, d, params.t(GCN2), d);
    h2.iter_mut().for_each(|v| *v = v.tanh());

    let s = params.t(SCORE_W);
    let c = params.t(SCORE_B)[0];
    let logits: Vec<f64> = (0..n)
        .map(|i| h2[i * d..(i + 1) * d].iter().zip(s).map(|(a, b)| a * b).sum::<f64>() + c)
        .collect();

    let live: Vec<usize> = (0..n).filter(|&i| !obs.is_eliminated(i)).collect();
    let mut pooled = vec![0.0; d];
    if !live.is_empty() {
        for &i in &live {
            pooled.iter_mut().zip(&h2[i * d..(i + 1) * d]).for_each(|(p, v)| *p += v);
        }
        let inv = 1.0 / live.len() as f64;
        pooled.iter_mut().for_each(|p| *p *= inv);
    }
    let layers = params.value_layers();
    let mut mlp_inputs = Vec::with_capacity(layers);
    let mut act = pooled;
    for k in 0..layers {
        let w = &params.tensors[VALUE_BASE + 2 * k];
        let b = params.t(VALUE_BASE + 2 * k + 1);
        let (rows, cols) = (w.shape[0], w.shape[1]);
        let mut next = matmul(&act, 1, rows, &w.data, cols);
        next.iter_mut().zip(b).for_each(|(v, bb)| *v += bb);
        if k + 1 < layers {
            next.iter_mut().for_each(|v| *v = v.tanh());
        }
        mlp_inputs.push(std::mem::replace(&mut act, next));
    }
    let value = act[0];

    let masked_log_probs = masked_log_softmax(&logits, &obs.action_mask);
    Ok(Trace {
        n,
        ax,
        h1,
        ah1,
        h2,
        live,
        mlp_inputs,
        out: PolicyOutput {
            logits,
            masked_log_probs,
            value,
        },
    })
}

pub fn forward(params: &PolicyParams, obs: &Observation) -> Result<PolicyOutput> {
    Ok(forward_trace(params, obs)?.out)
}

/// Samples from the masked distribution; returns the vertex and its log-probability.
pub fn sample_action(out: &PolicyOutput, rng: &mut impl Rng) -> Result<(usize, f64)> {
    let allowed: Vec<usize> = (0..out.masked_log_probs.len())
        .filter(|&i| out.masked_log_probs[i].is_finite())
        .collect();
    let last = *allowed
        .last()
        .ok_or_else(|| Error::Contract("no allowed action to sample".into()))?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &i in &allowed {
        acc += out.masked_log_probs[i].exp();
        if u < acc {
            return Ok((i, out.masked_log_probs[i]));
        }
    }
    Ok((last, out.masked_log_probs[last]))
}

/// Highest-probability allowed vertex; ties go to the lowest id.
pub fn greedy_action(out: &PolicyOutput) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &l) in out.masked_log_probs.iter().enumerate() {
        if l.is_finite() && best.is_none_or(|(_, b)| l > b) {
            best = Some((i, l));
        }
    }
    best.ok_or_else(|| Error::Contract("no allowed action".into()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec {
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub ent_coef: f64,
}

/// One transition as seen by the loss.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub obs: &'a Observation,
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Batch means of the loss terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

impl LossParts {
    fn add(&mut self, o: &LossParts) {
        self.total += o.total;
        self.policy += o.policy;
        self.value += o.value;
        self.entropy += o.entropy;
        self.clip_fraction += o.clip_fraction;
        self.approx_kl += o.approx_kl;
    }
}

/// Loss of one sample, already divided by the batch size, plus (optionally)
/// its gradient accumulated into `grads`.
fn sample_loss(
    params: &PolicyParams,
    sample: &Sample<'_>,
    spec: &LossSpec,
    batch: f64,
    grads: Option<&mut Gradients>,
) -> Result<LossParts> {
    let tr = forward_trace(params, sample.obs)?;
    let out = &tr.out;
    let logp = out.masked_log_probs[sample.action];
    if !logp.is_finite() {
        return Err(Error::InvalidAction { action: sample.action });
    }
    let eps = spec.clip_epsilon;
    let adv = sample.advantage;
    let ratio = (logp - sample.old_log_prob).exp();
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    let (s1, s2) = (ratio * adv, clipped * adv);
    let policy = -s1.min(s2);
    let entropy = out.entropy();
    let verr = out.value - sample.ret;
    let parts = LossParts {
        total: (policy + spec.value_coef * verr * verr - spec.ent_coef * entropy) / batch,
        policy: policy / batch,
        value: verr * verr / batch,
        entropy: entropy / batch,
        clip_fraction: if (ratio - 1.0).abs() > eps { 1.0 / batch } else { 0.0 },
        approx_kl: ((ratio - 1.0) - (logp - sample.old_log_prob)) / batch,
    };
    let Some(grads) = grads else {
        return Ok(parts);
    };

    let n = tr.n;
    let d = params.config.node_dim;
    // d loss / d logp_action
    let g_logp = if s1 <= s2 { -adv * ratio } else { 0.0 };
    let mut g_logits = vec![0.0; n];
    for (j, g) in g_logits.iter_mut().enumerate() {
        let l = out.masked_log_probs[j];
        if !l.is_finite() {
            continue;
        }
        let p = l.exp();
        let onehot = if j == sample.action { 1.0 } else { 0.0 };
        *g = (g_logp * (onehot - p) + spec.ent_coef * p * (l + entropy)) / batch;
    }
    let g_value = 2.0 * spec.value_coef * verr / batch;

    // score head
    let s = params.t(SCORE_W);
    let mut g_h2 = vec![0.0; n * d];
    {
        let gs = &mut grads.tensors[SCORE_W];
        for i in 0..n {
            let gz = g_logits[i];
            if gz == 0.0 {
                continue;
            }
            let row = &tr.h2[i * d..(i + 1) * d];
            for k in 0..d {
                gs[k] += gz * row[k];
                g_h2[i * d + k] += gz * s[k];
            }
        }
        grads.tensors[SCORE_B][0] += g_logits.iter().sum::<f64>();
    }

    // value MLP, output layer first
    let layers = params.value_layers();
    let mut g_out = vec![g_value];
    for k in (0..layers).rev() {
        let w = &params.tensors[VALUE_BASE + 2 * k];
        let (rows, cols) = (w.shape[0], w.shape[1]);
        let input = &tr.mlp_inputs[k];
        matmul_at_b_acc(input, 1, rows, &g_out, cols, &mut grads.tensors[VALUE_BASE + 2 * k]);
        grads.tensors[VALUE_BASE + 2 * k + 1]
            .iter_mut()
            .zip(&g_out)
            .for_each(|(a, b)| *a += b);
        let mut g_in = matmul_a_bt(&g_out, 1, cols, &w.data, rows);
        if k > 0 {
            // input of layer k is tanh output of layer k - 1
            g_in.iter_mut().zip(input).for_each(|(g, a)| *g *= 1.0 - a * a);
        }
        g_out = g_in;
    }
    if !tr.live.is_empty() {
        let inv = 1.0 / tr.live.len() as f64;
        for &i in &tr.live {
            for k in 0..d {
                g_h2[i * d + k] += g_out[k] * inv;
            }
        }
    }

    // second convolution
    let adj = &*sample.obs.adjacency;
    let g_p2: Vec<f64> = g_h2.iter().zip(&tr.h2).map(|(g, h)| g * (1.0 - h * h)).collect();
    matmul_at_b_acc(&tr.ah1, n, d, &g_p2, d, &mut grads.tensors[GCN2]);
    let g_ah1 = matmul_a_bt(&g_p2, n, d, params.t(GCN2), d);
    let g_h1 = aggregate_transpose(adj, &g_ah1, d);

    // first convolution
    let g_p1: Vec<f64> = g_h1.iter().zip(&tr.h1).map(|(g, h)| g * (1.0 - h * h)).collect();
    matmul_at_b_acc(&tr.ax, n, NUM_FEATURES, &g_p1, d, &mut grads.tensors[GCN1]);

    Ok(parts)
}

/// Mean PPO loss over `samples`:
///
/// ```text
/// -min(r A, clip(r, 1 - eps, 1 + eps) A) + c_v (V - R)^2 - c_e H
/// ```
pub fn loss(params: &PolicyParams, samples: &[Sample<'_>], spec: &LossSpec) -> Result<LossParts> {
    let batch = samples.len().max(1) as f64;
    let mut total = LossParts::default();
    for s in samples {
        total.add(&sample_loss(params, s, spec, batch, None)?);
    }
    Ok(total)
}

/// [`loss`] and its exact gradient. Per-sample gradients may be computed in
/// parallel; they are summed in sample order so the result does not depend
/// on the execution mode.
pub fn loss_and_grad(
    params: &PolicyParams,
    samples: &[Sample<'_>],
    spec: &LossSpec,
    exec: Execution,
) -> Result<(LossParts, Gradients)> {
    let batch = samples.len().max(1) as f64;
    let per_sample = exec.map(samples, |s| {
        let mut g = Gradients::zeros_like(params);
        sample_loss(params, s, spec, batch, Some(&mut g)).map(|p| (p, g))
    });
    let mut parts = LossParts::default();
    let mut grads = Gradients::zeros_like(params);
    for r in per_sample {
        let (p, g) = r?;
        parts.add(&p);
        grads.add_assign(&g);
    }
    Ok((parts, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elim::ElimState;
    use crate::env::observe;
    use crate::graph::Graph;
    use std::sync::Arc;

    fn obs_of(g: &Graph, masking: bool) -> Observation {
        let state = ElimState::from_graph(g);
        let csr = Arc::new(Csr::from(g));
        observe(&state, masking, AdjacencyMode::Current, &csr)
    }

    fn cfg(d: usize, sizes: Vec<usize>) -> PolicyConfig {
        PolicyConfig {
            node_dim: d,
            policy_sizes: sizes,
            ..PolicyConfig::default()
        }
    }

    #[test]
    fn shapes_and_init() {
        let p = PolicyParams::init(cfg(4, vec![5, 3]), 0).unwrap();
        let shapes: Vec<_> = p.tensors().iter().map(|t| t.shape.clone()).collect();
        assert_eq!(
            shapes,
            vec![vec![3, 4], vec![4, 4], vec![4], vec![1], vec![4, 5], vec![5], vec![5, 3], vec![3], vec![3, 1], vec![1]]
        );
        assert!(p.is_finite());
        // orthonormal columns of the square layer
        let w = &p.tensors()[GCN2].data;
        for a in 0..4 {
            for b in 0..4 {
                let dot: f64 = (0..4).map(|r| w[r * 4 + a] * w[r * 4 + b]).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!(PolicyParams::init(cfg(0, vec![]), 0).is_err());
        assert!(PolicyParams::init(cfg(3, vec![0]), 0).is_err());
    }

    #[test]
    fn edgeless_graph_scores_depend_on_own_features() {
        let p = PolicyParams::init(cfg(6, vec![]), 3).unwrap();
        let out = forward(&p, &obs_of(&Graph::empty(4), true)).unwrap();
        assert!(out.logits.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn complete_graph_is_uniform() {
        let k4 = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let p = PolicyParams::init(cfg(8, vec![4]), 1).unwrap();
        let out = forward(&p, &obs_of(&k4, true)).unwrap();
        for pr in out.probs() {
            assert!((pr - 0.25).abs() < 1e-12);
        }
        assert!((out.entropy() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn masked_entries_get_zero_probability() {
        let star = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let p = PolicyParams::init(cfg(5, vec![]), 9).unwrap();
        let out = forward(&p, &obs_of(&star, true)).unwrap();
        assert_eq!(out.masked_log_probs[0], f64::NEG_INFINITY);
        assert_eq!(out.probs()[0], 0.0);
        assert!((out.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let mut obs = obs_of(&Graph::empty(3), true);
        obs.action_mask.pop();
        let p = PolicyParams::init(cfg(2, vec![]), 0).unwrap();
        assert!(matches!(forward(&p, &obs), Err(Error::Config(_))));
    }

    #[test]
    fn sampling_contracts() {
        let out = PolicyOutput {
            logits: vec![0.0; 3],
            masked_log_probs: vec![f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY],
            value: 0.0,
        };
        let mut r = rng::seeded(0);
        for _ in 0..10 {
            assert_eq!(sample_action(&out, &mut r).unwrap(), (1, 0.0));
        }
        let none = PolicyOutput {
            masked_log_probs: vec![f64::NEG_INFINITY; 3],
            ..out.clone()
        };
        assert!(sample_action(&none, &mut r).is_err());
        assert!(greedy_action(&none).is_err());
        let lp = masked_log_softmax(&[0.5, 2.0, 2.0, 9.0], &[true, true, true, false]);
        let out = PolicyOutput { logits: vec![0.0; 4], masked_log_probs: lp, value: 0.0 };
        assert_eq!(greedy_action(&out).unwrap().0, 1);
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let k = 4;
        let out = PolicyOutput {
            logits: vec![0.0; 6],
            masked_log_probs: masked_log_softmax(&[0.0; 6], &[true, false, true, true, false, true]),
            value: 0.0,
        };
        let mut counts = [0usize; 6];
        let mut r = rng::seeded(42);
        let draws = 10_000;
        for _ in 0..draws {
            counts[sample_action(&out, &mut r).unwrap().0] += 1;
        }
        assert_eq!(counts[1] + counts[4], 0);
        let expected = draws as f64 / k as f64;
        let chi2: f64 = [0, 2, 3, 5]
            .iter()
            .map(|&i| (counts[i] as f64 - expected).powi(2) / expected)
            .sum();
        // 3 degrees of freedom, 0.999 quantile is 16.27
        assert!(chi2 < 16.27, "chi2 = {chi2}");
    }

    #[test]
    fn checkpoint_round_trip_and_validation() {
        let p = PolicyParams::init(cfg(3, vec![2]), 5).unwrap();
        let json = p.to_json();
        let q = PolicyParams::from_json(&json).unwrap();
        assert_eq!(p, q);
        assert_eq!(json, q.to_json());
        let broken = json.replace("\"node_dim\":3", "\"node_dim\":4");
        assert!(matches!(PolicyParams::from_json(&broken), Err(Error::Checkpoint(_))));
        assert!(PolicyParams::from_json("{}").is_err());
    }

    #[test]
    fn zero_advantage_gives_no_policy_gradient() {
        let g = crate::gen::gen_grid(2, 3).unwrap();
        let obs = obs_of(&g, false);
        let p = PolicyParams::init(cfg(4, vec![]), 2).unwrap();
        let out = forward(&p, &obs).unwrap();
        let s = Sample { obs: &obs, action: 2, old_log_prob: out.masked_log_probs[2], advantage: 0.0, ret: out.value };
        let spec = LossSpec { clip_epsilon: 0.2, value_coef: 0.5, ent_coef: 0.0 };
        let (parts, grads) = loss_and_grad(&p, &[s], &spec, Execution::Sequential).unwrap();
        assert_eq!(parts.total, 0.0);
        assert!(grads.is_zero());
    }
}
