//! Elimination as a reinforcement-learning environment.
//!
//! One episode eliminates every vertex of a graph. The reward of a step is
//! minus the number of fill edges it created, so an episode's return is the
//! negated fill of the realized ordering. Observations carry three features
//! per vertex:
//!
//! | column | value                                                 |
//! |--------|-------------------------------------------------------|
//! | 0      | current degree / (n - 1)                              |
//! | 1      | fill if eliminated now / C(n - 1, 2), clamped to 1    |
//! | 2      | 1 if eliminated, else 0                               |
//!
//! Both normalizers are 0 when undefined (n < 2 and n < 3 respectively).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::elim::{ElimState, EliminationOrder};
use crate::error::{Error, Result};
use crate::gen;
use crate::graph::{Csr, Graph};
use crate::heuristics::{candidate_mask_with_fills, fill_scores};
use crate::par::Execution;
use crate::rng::{self, ChaCha8Rng};

pub const NUM_FEATURES: usize = 3;

/// Which adjacency the policy message-passes over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjacencyMode {
    /// Fill-augmented graph, eliminated vertices isolated.
    #[default]
    Current,
    /// The input graph, unchanged across the episode.
    Original,
}

impl std::str::FromStr for AdjacencyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "current" => Ok(AdjacencyMode::Current),
            "original" => Ok(AdjacencyMode::Original),
            other => Err(Error::Config(format!("unknown adjacency mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum GraphSource {
    Fixed(Arc<Graph>),
    /// A fresh `G(n, p)` per reset, drawn from the environment's seed.
    Gnp { n: usize, p: f64 },
}

#[derive(Clone, Debug)]
pub struct EnvConfig {
    pub masking_enabled: bool,
    pub seed: u64,
    pub adjacency: AdjacencyMode,
    pub source: GraphSource,
}

impl EnvConfig {
    pub fn fixed(graph: Arc<Graph>, masking_enabled: bool) -> Self {
        EnvConfig {
            masking_enabled,
            seed: 0,
            adjacency: AdjacencyMode::Current,
            source: GraphSource::Fixed(graph),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub features: Vec<[f64; NUM_FEATURES]>,
    pub adjacency: Arc<Csr>,
    pub action_mask: Vec<bool>,
}

impl Observation {
    pub fn n(&self) -> usize {
        self.features.len()
    }

    pub fn is_eliminated(&self, v: usize) -> bool {
        self.features[v][2] != 0.0
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub fill_added: usize,
}

/// Builds the observation of `state`. A pure function of the current
/// adjacency, the eliminated flags, and the two switches.
pub fn observe(
    state: &ElimState,
    masking_enabled: bool,
    adjacency: AdjacencyMode,
    original_csr: &Arc<Csr>,
) -> Observation {
    let n = state.n();
    let g = state.current();
    let fills = fill_scores(state);
    let deg_norm = if n >= 2 { (n - 1) as f64 } else { 0.0 };
    let fill_norm = if n >= 3 { ((n - 1) * (n - 2) / 2) as f64 } else { 0.0 };
    let features = (0..n)
        .map(|v| {
            if state.is_eliminated(v) {
                [0.0, 0.0, 1.0]
            } else {
                let d = if deg_norm > 0.0 { g.degree(v) as f64 / deg_norm } else { 0.0 };
                let f = if fill_norm > 0.0 { (fills[v] as f64 / fill_norm).min(1.0) } else { 0.0 };
                [d, f, 0.0]
            }
        })
        .collect();
    let action_mask = if state.is_done() {
        vec![false; n]
    } else if masking_enabled {
        candidate_mask_with_fills(state, &fills)
            .expect("state has live vertices")
            .allowed
    } else {
        state.eliminated().iter().map(|&e| !e).collect()
    };
    let adjacency = match adjacency {
        AdjacencyMode::Current => Arc::new(Csr::from(g)),
        AdjacencyMode::Original => Arc::clone(original_csr),
    };
    Observation {
        features,
        adjacency,
        action_mask,
    }
}

/// Single elimination environment.
pub struct FillEnv {
    config: EnvConfig,
    rng: ChaCha8Rng,
    state: Option<ElimState>,
    original_csr: Arc<Csr>,
    last_mask: Vec<bool>,
}

impl FillEnv {
    pub fn new(config: EnvConfig) -> Self {
        FillEnv {
            rng: rng::seeded(config.seed),
            config,
            state: None,
            original_csr: Arc::new(Csr::from(&Graph::empty(0))),
            last_mask: Vec::new(),
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> Option<&ElimState> {
        self.state.as_ref()
    }

    /// Restarts the episode. Re-seeds first when `seed` is given.
    pub fn reset_with_seed(&mut self, seed: Option<u64>) -> Result<Observation> {
        if let Some(s) = seed {
            self.config.seed = s;
            self.rng = rng::seeded(s);
        }
        let graph = match &self.config.source {
            GraphSource::Fixed(g) => Arc::clone(g),
            GraphSource::Gnp { n, p } => {
                use rand::Rng;
                let s = self.rng.random::<u64>();
                Arc::new(gen::gen_gnp(*n, *p, s)?)
            }
        };
        if graph.n() == 0 {
            return Err(Error::NoVertices);
        }
        self.original_csr = Arc::new(Csr::from(&*graph));
        let state = ElimState::new(graph);
        let obs = observe(&state, self.config.masking_enabled, self.config.adjacency, &self.original_csr);
        self.last_mask = obs.action_mask.clone();
        self.state = Some(state);
        Ok(obs)
    }

    pub fn reset(&mut self) -> Result<Observation> {
        self.reset_with_seed(None)
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| Error::Contract("step called before reset".into()))?;
        if state.is_done() {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        if action >= state.n() || !self.last_mask[action] {
            return Err(Error::InvalidAction { action });
        }
        let fill_added = state.eliminate(action)?;
        let observation = observe(state, self.config.masking_enabled, self.config.adjacency, &self.original_csr);
        self.last_mask = observation.action_mask.clone();
        Ok(StepResult {
            observation,
            reward: -(fill_added as f64),
            done: state.is_done(),
            fill_added,
        })
    }
}

/// A finished episode reported by [`VecEnv::step`].
#[derive(Clone, Debug)]
pub struct FinishedEpisode {
    pub env_index: usize,
    pub graph: Arc<Graph>,
    pub order: EliminationOrder,
}

#[derive(Clone, Debug)]
pub struct VecStepResult {
    /// Observation to act on next; after an episode ends this is the first
    /// observation of the next episode.
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub fill_added: usize,
    pub finished: Option<FinishedEpisode>,
}

/// Lock-step batch of independent environments with per-env auto-reset.
pub struct VecEnv {
    envs: Vec<FillEnv>,
    exec: Execution,
}

impl VecEnv {
    pub fn new(configs: Vec<EnvConfig>, exec: Execution) -> Result<Self> {
        if configs.is_empty() {
            return Err(Error::Config("vector environment needs at least one config".into()));
        }
        Ok(VecEnv {
            envs: configs.into_iter().map(FillEnv::new).collect(),
            exec,
        })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn envs(&self) -> &[FillEnv] {
        &self.envs
    }

    pub fn reset(&mut self) -> Result<Vec<Observation>> {
        self.exec.map_mut(&mut self.envs, |_, env| env.reset()).into_iter().collect()
    }

    pub fn step(&mut self, actions: &[usize]) -> Result<Vec<VecStepResult>> {
        if actions.len() != self.envs.len() {
            return Err(Error::Contract(format!(
                "{} actions for {} environments",
                actions.len(),
                self.envs.len()
            )));
        }
        self.exec
            .map_mut(&mut self.envs, |i, env| -> Result<VecStepResult> {
                let r = env.step(actions[i])?;
                if !r.done {
                    return Ok(VecStepResult {
                        observation: r.observation,
                        reward: r.reward,
                        done: false,
                        fill_added: r.fill_added,
                        finished: None,
                    });
                }
                let state = env.state().expect("stepped env has state");
                let finished = FinishedEpisode {
                    env_index: i,
                    graph: Arc::clone(state.original()),
                    order: EliminationOrder {
                        pi: state.order_so_far().to_vec(),
                        fill_cost: state.cumulative_fill(),
                    },
                };
                let observation = env.reset()?;
                Ok(VecStepResult {
                    observation,
                    reward: r.reward,
                    done: true,
                    fill_added: r.fill_added,
                    finished: Some(finished),
                })
            })
            .into_iter()
            .collect()
    }
}
