//! Running a trained policy on instances and comparing it with the
//! greedy baselines.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::elim::{ElimState, EliminationOrder};
use crate::env::observe;
use crate::error::Result;
use crate::graph::{Csr, Graph};
use crate::heuristics::{best_of_restarts, heuristic_order, Rule, TieBreak};
use crate::par::Execution;
use crate::policy::{forward, greedy_action, sample_action, PolicyParams};
use crate::rng::{self, ChaCha8Rng};

/// One full episode on `g`: greedy decoding when `rng` is `None`.
pub fn policy_rollout(params: &PolicyParams, g: &Arc<Graph>, mut rng: Option<&mut ChaCha8Rng>) -> Result<EliminationOrder> {
    let cfg = params.config();
    let csr = Arc::new(Csr::from(g.as_ref()));
    let mut state = ElimState::new(Arc::clone(g));
    while !state.is_done() {
        let obs = observe(&state, cfg.action_masking, cfg.adjacency, &csr);
        let out = forward(params, &obs)?;
        let (v, _) = match rng.as_deref_mut() {
            Some(r) => sample_action(&out, r)?,
            None => greedy_action(&out)?,
        };
        state.eliminate(v)?;
    }
    Ok(EliminationOrder {
        pi: state.order_so_far().to_vec(),
        fill_cost: state.cumulative_fill(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Sampled rollouts per instance.
    pub samples: usize,
    /// Also run one greedy rollout.
    pub greedy: bool,
    /// Random tie-break restarts for the baselines.
    pub restarts: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            samples: 25,
            greedy: true,
            restarts: 64,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

/// Best of the greedy rollout (if enabled) and `samples` sampled rollouts.
/// Sample `s` of instance `instance` draws from its own stream. Ties keep
/// the earlier candidate, greedy first.
pub fn policy_best_order(
    params: &PolicyParams,
    g: &Arc<Graph>,
    cfg: &EvalConfig,
    instance: u64,
) -> Result<EliminationOrder> {
    let mut runs = Vec::new();
    if cfg.greedy || cfg.samples == 0 {
        runs.push(policy_rollout(params, g, None));
    }
    runs.extend(cfg.execution.map_range(cfg.samples, |s| {
        let mut r = rng::substream(cfg.seed, instance, s as u64);
        policy_rollout(params, g, Some(&mut r))
    }));
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(runs.into_iter().min_by_key(|o| o.fill_cost).expect("at least one rollout"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub vertices: usize,
    pub edges: usize,
    pub learned_fill: usize,
    pub learned_order: Vec<usize>,
    /// Best over random tie-break restarts.
    pub mdh_fill: usize,
    pub mfillh_fill: usize,
    /// Single run with lowest-id tie-breaking.
    pub mdh_lowest_fill: usize,
    pub mfillh_lowest_fill: usize,
}

/// Relative improvement `(baseline - learned) / baseline`; positive when the
/// policy beats the baseline. A zero baseline gives 0 when matched and
/// negative infinity otherwise.
pub fn relative_gap(baseline: usize, learned: usize) -> f64 {
    if baseline == 0 {
        return if learned == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    (baseline as f64 - learned as f64) / baseline as f64
}

impl ComparisonRow {
    pub fn gap_mdh(&self) -> f64 {
        relative_gap(self.mdh_fill, self.learned_fill)
    }

    pub fn gap_mfillh(&self) -> f64 {
        relative_gap(self.mfillh_fill, self.learned_fill)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

pub const REPORT_COLUMNS: &str =
    "name,vertices,edges,learned_fill,mdh_fill,mfillh_fill,gap_mdh,gap_mfillh,mdh_lowest_fill,mfillh_lowest_fill";

impl ComparisonReport {
    pub fn total_learned(&self) -> usize {
        self.rows.iter().map(|r| r.learned_fill).sum()
    }

    pub fn total_mdh(&self) -> usize {
        self.rows.iter().map(|r| r.mdh_fill).sum()
    }

    pub fn total_mfillh(&self) -> usize {
        self.rows.iter().map(|r| r.mfillh_fill).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_COLUMNS}\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.name,
                r.vertices,
                r.edges,
                r.learned_fill,
                r.mdh_fill,
                r.mfillh_fill,
                r.gap_mdh(),
                r.gap_mfillh(),
                r.mdh_lowest_fill,
                r.mfillh_lowest_fill
            )
            .unwrap();
        }
        out
    }

    /// Aligned plain-text table with a totals line.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(8);
        let mut out = format!(
            "{:<width$} {:>6} {:>7} {:>8} {:>8} {:>8} {:>9} {:>9}\n",
            "instance", "|V|", "|E|", "learned", "mdh", "mfillh", "gap_mdh", "gap_mfh"
        );
        for r in &self.rows {
            writeln!(
                out,
                "{:<width$} {:>6} {:>7} {:>8} {:>8} {:>8} {:>8.1}% {:>8.1}%",
                r.name,
                r.vertices,
                r.edges,
                r.learned_fill,
                r.mdh_fill,
                r.mfillh_fill,
                100.0 * r.gap_mdh(),
                100.0 * r.gap_mfillh()
            )
            .unwrap();
        }
        writeln!(
            out,
            "{:<width$} {:>6} {:>7} {:>8} {:>8} {:>8}",
            "total",
            "",
            "",
            self.total_learned(),
            self.total_mdh(),
            self.total_mfillh()
        )
        .unwrap();
        out
    }
}

/// Baseline fills of `g`: `(mdh best, mfillh best, mdh lowest-id, mfillh lowest-id)`.
pub fn baseline_fills(g: &Graph, restarts: usize, seed: u64, exec: Execution) -> (usize, usize, usize, usize) {
    (
        best_of_restarts(g, Rule::MinDegree, restarts, seed, exec).fill_cost,
        best_of_restarts(g, Rule::MinFill, restarts, seed, exec).fill_cost,
        heuristic_order(g, Rule::MinDegree, TieBreak::LowestId).fill_cost,
        heuristic_order(g, Rule::MinFill, TieBreak::LowestId).fill_cost,
    )
}

/// Evaluates `params` on each named instance, in parallel across instances.
pub fn evaluate(params: &PolicyParams, instances: &[(String, Arc<Graph>)], cfg: &EvalConfig) -> Result<ComparisonReport> {
    let rows = cfg.execution.map_range(instances.len(), |i| {
        let (name, g) = &instances[i];
        let learned = policy_best_order(params, g, cfg, i as u64)?;
        learned.verify(g)?;
        let (mdh, mfillh, mdh_lo, mfillh_lo) = baseline_fills(g, cfg.restarts, cfg.seed, cfg.execution);
        Ok(ComparisonRow {
            name: name.clone(),
            vertices: g.n(),
            edges: g.num_edges(),
            learned_fill: learned.fill_cost,
            learned_order: learned.pi,
            mdh_fill: mdh,
            mfillh_fill: mfillh,
            mdh_lowest_fill: mdh_lo,
            mfillh_lowest_fill: mfillh_lo,
        })
    });
    Ok(ComparisonReport {
        rows: rows.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elim::fill_in_cost;
    use crate::policy::PolicyConfig;

    fn params() -> PolicyParams {
        PolicyParams::init(PolicyConfig { node_dim: 8, ..PolicyConfig::default() }, 3).unwrap()
    }

    #[test]
    fn rollouts_are_valid_orderings() {
        let g = Arc::new(crate::gen::gen_grid(3, 4).unwrap());
        let p = params();
        let greedy = policy_rollout(&p, &g, None).unwrap();
        assert_eq!(fill_in_cost(&g, &greedy.pi).unwrap(), greedy.fill_cost);
        let mut r = rng::seeded(1);
        let sampled = policy_rollout(&p, &g, Some(&mut r)).unwrap();
        sampled.verify(&g).unwrap();
    }

    #[test]
    fn best_order_is_deterministic_and_no_worse_than_greedy() {
        let g = Arc::new(crate::gen::gen_gnp(14, 0.3, 5).unwrap());
        let p = params();
        let cfg = EvalConfig { samples: 6, ..EvalConfig::default() };
        let a = policy_best_order(&p, &g, &cfg, 0).unwrap();
        let b = policy_best_order(&p, &g, &EvalConfig { execution: Execution::Sequential, ..cfg.clone() }, 0).unwrap();
        assert_eq!(a, b);
        assert!(a.fill_cost <= policy_rollout(&p, &g, None).unwrap().fill_cost);
    }

    #[test]
    fn report_formats() {
        let report = ComparisonReport {
            rows: vec![ComparisonRow {
                name: "g".into(),
                vertices: 4,
                edges: 4,
                learned_fill: 1,
                learned_order: vec![0, 1, 2, 3],
                mdh_fill: 1,
                mfillh_fill: 2,
                mdh_lowest_fill: 1,
                mfillh_lowest_fill: 2,
            }],
        };
        assert_eq!(report.to_csv().lines().nth(1), Some("g,4,4,1,1,2,0,0.5,1,2"));
        let table = report.to_table();
        assert!(table.lines().last().unwrap().starts_with("total"));
        assert!(table.contains("50.0%"));
        assert_eq!(relative_gap(0, 0), 0.0);
        assert_eq!(relative_gap(0, 1), f64::NEG_INFINITY);
        assert_eq!(relative_gap(40, 37), 0.075);
    }

    #[test]
    fn evaluate_covers_every_instance() {
        let inst: Vec<(String, Arc<Graph>)> = (0..3)
            .map(|s| (format!("gnp{s}"), Arc::new(crate::gen::gen_gnp(10, 0.3, s).unwrap())))
            .collect();
        let cfg = EvalConfig { samples: 2, restarts: 4, ..EvalConfig::default() };
        let r = evaluate(&params(), &inst, &cfg).unwrap();
        assert_eq!(r.rows.len(), 3);
        for (row, (_, g)) in r.rows.iter().zip(&inst) {
            assert!(row.mdh_fill <= row.mdh_lowest_fill);
            assert_eq!(row.edges, g.num_edges());
        }
    }
}
