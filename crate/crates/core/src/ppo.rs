//! Masked PPO training of the graph policy.
//!
//! A timestep is one vertex elimination. Each update collects
//! `rollout_length` steps from every parallel environment, computes GAE
//! advantages, then runs `epochs_per_update` passes of clipped-surrogate
//! minibatch steps with Adam.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::elim::EliminationOrder;
use crate::env::{AdjacencyMode, EnvConfig, FinishedEpisode, GraphSource, Observation, VecEnv};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::io;
use crate::par::Execution;
use crate::policy::{
    forward, loss_and_grad, sample_action, Gradients, LossParts, LossSpec, PolicyConfig, PolicyParams, Sample,
};
use crate::rng::{self, ChaCha8Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub total_timesteps: usize,
    pub parallel_envs: usize,
    pub learning_rate: f64,
    pub node_dim: usize,
    pub policy_sizes: Vec<usize>,
    pub ent_coef: f64,
    pub action_masking: bool,
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    /// Steps per environment per update; `None` means `round(2048 / parallel_envs)`.
    pub rollout_length: Option<usize>,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub seed: u64,
    pub adjacency: AdjacencyMode,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_timesteps: 500_000,
            parallel_envs: 5,
            learning_rate: 1e-4,
            node_dim: 32,
            policy_sizes: Vec::new(),
            ent_coef: 0.0,
            action_masking: true,
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            rollout_length: None,
            epochs_per_update: 10,
            minibatch_size: 64,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            seed: 0,
            adjacency: AdjacencyMode::Current,
            execution: Execution::Parallel,
        }
    }
}

impl TrainConfig {
    pub fn steps_per_env(&self) -> usize {
        self.rollout_length
            .unwrap_or_else(|| ((2048.0 / self.parallel_envs.max(1) as f64).round() as usize).max(1))
    }

    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            node_dim: self.node_dim,
            policy_sizes: self.policy_sizes.clone(),
            adjacency: self.adjacency,
            action_masking: self.action_masking,
        }
    }

    pub fn loss_spec(&self) -> LossSpec {
        LossSpec {
            clip_epsilon: self.clip_epsilon,
            value_coef: self.value_coef,
            ent_coef: self.ent_coef,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.parallel_envs == 0 {
            return bad("parallel_envs must be at least 1".into());
        }
        if self.steps_per_env() == 0 {
            return bad("rollout_length must be at least 1".into());
        }
        let per_update = self.steps_per_env() * self.parallel_envs;
        if self.total_timesteps != 0 && self.total_timesteps < per_update {
            return bad(format!(
                "total_timesteps {} is below one rollout ({} steps x {} envs = {per_update})",
                self.total_timesteps,
                self.steps_per_env(),
                self.parallel_envs
            ));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("max_grad_norm", self.max_grad_norm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("ent_coef", self.ent_coef), ("value_coef", self.value_coef)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad(format!("clip_epsilon must be in (0, 1), got {}", self.clip_epsilon));
        }
        for (name, v) in [("gamma", self.gamma), ("gae_lambda", self.gae_lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.epochs_per_update == 0 || self.minibatch_size == 0 {
            return bad("epochs_per_update and minibatch_size must be positive".into());
        }
        if self.node_dim == 0 || self.policy_sizes.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub obs: Observation,
    pub action: usize,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    /// The episode ended with this step.
    pub done: bool,
}

/// Transitions of one collection phase, stored step-major
/// (`index = t * num_envs + env`).
#[derive(Clone, Debug)]
pub struct RolloutBuffer {
    pub num_envs: usize,
    pub length: usize,
    pub transitions: Vec<Transition>,
    /// Value of the observation following the last step of each env.
    pub bootstrap_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn get(&self, t: usize, env: usize) -> &Transition {
        &self.transitions[t * self.num_envs + env]
    }
}

/// Generalized advantage estimates for one environment's step sequence.
///
/// `dones[t]` marks that step `t` ended an episode, which cuts both the
/// bootstrap and the advantage recursion. Returns `(advantages, returns)`
/// with `returns = advantages + values`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let len = rewards.len();
    let mut adv = vec![0.0; len];
    let mut running = 0.0;
    for t in (0..len).rev() {
        let next_value = if t + 1 < len { values[t + 1] } else { last_value };
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Fills `buffer.advantages` and `buffer.returns` (unnormalized).
pub fn compute_gae(buffer: &mut RolloutBuffer, gamma: f64, lambda: f64) {
    let (ne, len) = (buffer.num_envs, buffer.length);
    buffer.advantages = vec![0.0; ne * len];
    buffer.returns = vec![0.0; ne * len];
    for e in 0..ne {
        let series = |f: &dyn Fn(&Transition) -> f64| -> Vec<f64> { (0..len).map(|t| f(buffer.get(t, e))).collect() };
        let rewards = series(&|x| x.reward);
        let values = series(&|x| x.value);
        let dones: Vec<bool> = (0..len).map(|t| buffer.get(t, e).done).collect();
        let (a, r) = gae(&rewards, &values, &dones, buffer.bootstrap_values[e], gamma, lambda);
        for t in 0..len {
            buffer.advantages[t * ne + e] = a[t];
            buffer.returns[t * ne + e] = r[t];
        }
    }
}

/// Shifts to mean 0 and scales to standard deviation 1 (guarded by 1e-8).
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    xs.iter_mut().for_each(|x| *x = (*x - mean) / (std + 1e-8));
}

/// Drives a [`VecEnv`] with the current policy.
pub struct Collector {
    venv: VecEnv,
    obs: Vec<Observation>,
    rngs: Vec<ChaCha8Rng>,
    exec: Execution,
}

impl Collector {
    pub fn new(configs: Vec<EnvConfig>, seed: u64, exec: Execution) -> Result<Self> {
        let mut venv = VecEnv::new(configs, exec)?;
        let obs = venv.reset()?;
        let rngs = (0..venv.len()).map(|i| rng::substream(seed, 1, i as u64)).collect();
        Ok(Collector { venv, obs, rngs, exec })
    }

    pub fn num_envs(&self) -> usize {
        self.venv.len()
    }

    /// Runs `length` lock-step steps and returns the buffer and every episode
    /// that finished along the way (in step, then env, order).
    pub fn collect_rollouts(
        &mut self,
        params: &PolicyParams,
        length: usize,
    ) -> Result<(RolloutBuffer, Vec<FinishedEpisode>)> {
        let ne = self.venv.len();
        let mut transitions = Vec::with_capacity(length * ne);
        let mut finished = Vec::new();
        for _ in 0..length {
            let outs = self.exec.map(&self.obs, |o| forward(params, o));
            let mut actions = Vec::with_capacity(ne);
            let mut picks = Vec::with_capacity(ne);
            for (out, rng) in outs.into_iter().zip(&mut self.rngs) {
                let out = out?;
                let (a, lp) = sample_action(&out, rng)?;
                actions.push(a);
                picks.push((a, lp, out.value));
            }
            let results = self.venv.step(&actions)?;
            for ((res, obs), (a, lp, v)) in results.into_iter().zip(self.obs.iter_mut()).zip(picks) {
                let prev = std::mem::replace(obs, res.observation);
                transitions.push(Transition {
                    obs: prev,
                    action: a,
                    log_prob: lp,
                    reward: res.reward,
                    value: v,
                    done: res.done,
                });
                finished.extend(res.finished);
            }
        }
        let bootstrap_values = self
            .exec
            .map(&self.obs, |o| forward(params, o).map(|out| out.value))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok((
            RolloutBuffer {
                num_envs: ne,
                length,
                transitions,
                bootstrap_values,
                advantages: Vec::new(),
                returns: Vec::new(),
            },
            finished,
        ))
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(params: &PolicyParams, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
            step: 0,
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
        }
    }

    pub fn step(&mut self, params: &mut PolicyParams, grads: &Gradients) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (k, t) in params.tensors_mut().iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m.tensors[k], &mut self.v.tensors[k], &grads.tensors[k]);
            for i in 0..t.data.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                t.data[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Scales `grads` down to `max_norm` if needed; returns the pre-clip norm.
pub fn clip_grad_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / (norm + 1e-6));
    }
    norm
}

/// Mean loss terms over all minibatches of one update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub minibatches: usize,
}

/// Normalizes the buffer's advantages, then runs the clipped-surrogate
/// epochs. `buffer.advantages` must already hold fresh GAE values.
pub fn ppo_update(
    params: &mut PolicyParams,
    opt: &mut Adam,
    buffer: &RolloutBuffer,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    if buffer.advantages.len() != buffer.len() || buffer.returns.len() != buffer.len() {
        return Err(Error::Contract("advantages have not been computed for this buffer".into()));
    }
    let mut adv = buffer.advantages.clone();
    normalize(&mut adv);
    let spec = cfg.loss_spec();
    let mut idx: Vec<usize> = (0..buffer.len()).collect();
    let mut sum = LossParts::default();
    let mut batches = 0;
    for _ in 0..cfg.epochs_per_update {
        idx.shuffle(rng);
        for chunk in idx.chunks(cfg.minibatch_size) {
            let samples: Vec<Sample<'_>> = chunk
                .iter()
                .map(|&i| {
                    let tr = &buffer.transitions[i];
                    Sample {
                        obs: &tr.obs,
                        action: tr.action,
                        old_log_prob: tr.log_prob,
                        advantage: adv[i],
                        ret: buffer.returns[i],
                    }
                })
                .collect();
            let (parts, mut grads) = loss_and_grad(params, &samples, &spec, cfg.execution)?;
            if !parts.total.is_finite() || grads.tensors.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "loss {:?} (policy {}, value {}, entropy {}) after {batches} minibatches",
                    parts.total, parts.policy, parts.value, parts.entropy
                )));
            }
            clip_grad_norm(&mut grads, cfg.max_grad_norm);
            opt.step(params, &grads);
            sum.policy += parts.policy;
            sum.value += parts.value;
            sum.entropy += parts.entropy;
            sum.clip_fraction += parts.clip_fraction;
            sum.approx_kl += parts.approx_kl;
            batches += 1;
        }
    }
    let k = batches.max(1) as f64;
    Ok(UpdateStats {
        policy_loss: sum.policy / k,
        value_loss: sum.value / k,
        entropy: sum.entropy / k,
        clip_fraction: sum.clip_fraction / k,
        approx_kl: sum.approx_kl / k,
        minibatches: batches,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    pub timesteps: usize,
    /// Mean fill of episodes finished during this update's rollout.
    pub mean_fill: Option<f64>,
    /// Sum over training graphs of the best fill seen so far; `None` until
    /// every graph has finished an episode.
    pub best_fill: Option<usize>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

pub const LOG_COLUMNS: &str = "timesteps,mean_fill,best_fill,policy_loss,value_loss,entropy";

impl TrainLog {
    /// CSV text; `echo` lines are written first as `# ` comments.
    pub fn to_csv(&self, echo: &[String]) -> String {
        let mut out = String::new();
        for e in echo {
            writeln!(out, "# {e}").unwrap();
        }
        writeln!(out, "{LOG_COLUMNS}").unwrap();
        for e in &self.entries {
            let opt_f = e.mean_fill.map(|v| v.to_string()).unwrap_or_default();
            let opt_u = e.best_fill.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                e.timesteps, opt_f, opt_u, e.policy_loss, e.value_loss, e.entropy
            )
            .unwrap();
        }
        out
    }
}

/// Where [`train`] writes its artifacts: `<prefix>.ckpt.json`,
/// `<prefix>.log.csv` and one ordering file per training graph
/// (`<prefix>.order`, or `<prefix>.<i>.order` with several graphs).
#[derive(Clone, Debug)]
pub struct TrainArtifacts {
    pub prefix: PathBuf,
    /// Vertex labels per training graph; numeric ids when absent.
    pub labels: Option<Vec<Vec<String>>>,
}

impl TrainArtifacts {
    fn with_suffix(&self, suffix: &str) -> PathBuf {
        let mut s = self.prefix.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.with_suffix(".ckpt.json")
    }

    pub fn log_path(&self) -> PathBuf {
        self.with_suffix(".log.csv")
    }

    pub fn order_path(&self, graph: usize, graphs: usize) -> PathBuf {
        if graphs == 1 {
            self.with_suffix(".order")
        } else {
            self.with_suffix(&format!(".{graph}.order"))
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub log: TrainLog,
    /// Best ordering seen per training graph.
    pub best: Vec<Option<EliminationOrder>>,
    pub timesteps: usize,
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Trains one parameter set on `graphs`. Environment `i` owns
/// `graphs[i % graphs.len()]` for the whole run.
pub fn train(cfg: &TrainConfig, graphs: &[Arc<Graph>], artifacts: Option<&TrainArtifacts>) -> Result<TrainOutcome> {
    cfg.validate()?;
    if graphs.is_empty() {
        return Err(Error::Config("training needs at least one graph".into()));
    }
    if graphs.len() > cfg.parallel_envs {
        return Err(Error::Config(format!(
            "{} training graphs but only {} parallel environments",
            graphs.len(),
            cfg.parallel_envs
        )));
    }
    if graphs.iter().any(|g| g.n() == 0) {
        return Err(Error::NoVertices);
    }
    let echo = vec![format!("config {}", serde_json::to_string(cfg).expect("config serializes"))];
    let mut params = PolicyParams::init(cfg.policy_config(), cfg.seed)?;
    let mut opt = Adam::new(&params, cfg.learning_rate);
    let mut log = TrainLog::default();
    let mut best: Vec<Option<EliminationOrder>> = vec![None; graphs.len()];

    let flush = |params: &PolicyParams, log: &TrainLog| -> Result<()> {
        if let Some(a) = artifacts {
            write_atomic(&a.checkpoint_path(), &params.to_json())?;
            write_atomic(&a.log_path(), &log.to_csv(&echo))?;
        }
        Ok(())
    };

    if cfg.total_timesteps == 0 {
        flush(&params, &log)?;
        return Ok(TrainOutcome { params, log, best, timesteps: 0 });
    }

    let graph_of_env: Vec<usize> = (0..cfg.parallel_envs).map(|i| i % graphs.len()).collect();
    let configs = graph_of_env
        .iter()
        .enumerate()
        .map(|(i, &gi)| EnvConfig {
            masking_enabled: cfg.action_masking,
            seed: cfg.seed.wrapping_add(i as u64),
            adjacency: cfg.adjacency,
            source: GraphSource::Fixed(Arc::clone(&graphs[gi])),
        })
        .collect();
    let mut collector = Collector::new(configs, cfg.seed, cfg.execution)?;
    let mut shuffle_rng = rng::substream(cfg.seed, 2, 0);
    let length = cfg.steps_per_env();
    let mut timesteps = 0;

    while timesteps < cfg.total_timesteps {
        let (mut buffer, finished) = collector.collect_rollouts(&params, length)?;
        timesteps += buffer.len();

        let mut improved = Vec::new();
        let mut fills = Vec::with_capacity(finished.len());
        for ep in &finished {
            let gi = graph_of_env[ep.env_index];
            fills.push(ep.order.fill_cost as f64);
            if best[gi].as_ref().is_none_or(|b| ep.order.fill_cost < b.fill_cost) {
                best[gi] = Some(ep.order.clone());
                improved.push(gi);
            }
        }
        if let Some(a) = artifacts {
            improved.sort_unstable();
            improved.dedup();
            for gi in improved {
                let order = best[gi].as_ref().expect("just set");
                order.verify(&graphs[gi])?;
                let ids: Vec<String>;
                let labels = match &a.labels {
                    Some(l) => &l[gi],
                    None => {
                        ids = (0..graphs[gi].n()).map(|v| v.to_string()).collect();
                        &ids
                    }
                };
                let text = io::format_ordering(order, labels, &[format!("timesteps={timesteps}"), echo[0].clone()]);
                write_atomic(&a.order_path(gi, graphs.len()), &text)?;
            }
        }

        compute_gae(&mut buffer, cfg.gamma, cfg.gae_lambda);
        let stats = ppo_update(&mut params, &mut opt, &buffer, cfg, &mut shuffle_rng)?;
        let best_fill = best
            .iter()
            .map(|b| b.as_ref().map(|o| o.fill_cost))
            .sum::<Option<usize>>();
        log.entries.push(LogEntry {
            timesteps,
            mean_fill: (!fills.is_empty()).then(|| fills.iter().sum::<f64>() / fills.len() as f64),
            best_fill,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
        });
        flush(&params, &log)?;
    }
    Ok(TrainOutcome {
        params,
        log,
        best,
        timesteps,
    })
}
