use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fillorder::elim::{fill_in_cost, EliminationOrder};
use fillorder::eval::{evaluate, policy_best_order, EvalConfig};
use fillorder::gen::{gen_gnp, gen_grid};
use fillorder::heuristics::{best_of_restarts, heuristic_order, Rule, TieBreak};
use fillorder::io::{self, Format, LoadedGraph};
use fillorder::oracle::exact_min_fill;
use fillorder::policy::PolicyParams;
use fillorder::ppo::{train, TrainArtifacts, TrainConfig};
use fillorder::{rng, Error, Execution, Graph, Result};
use rand::seq::SliceRandom;

use crate::{Command, EvalArgs, GenArgs, GenKind, Method, OracleArgs, OrderArgs, Tie, TrainArgs};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Order(a) => cmd_order(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Gen(a) => cmd_gen(a),
    }
}

fn load(path: &Path, format: Format) -> Result<LoadedGraph> {
    let loaded = io::load_graph(path, format)?;
    let r = &loaded.report;
    if r.self_loops + r.duplicates > 0 {
        eprintln!(
            "{}: dropped {} self-loops and {} duplicate edges",
            path.display(),
            r.self_loops,
            r.duplicates
        );
    }
    Ok(loaded)
}

fn numeric_labels(n: usize) -> Vec<String> {
    (0..n).map(|v| v.to_string()).collect()
}

/// Re-verifies the fill of `order` on `g`, then writes it.
fn emit_ordering(
    g: &Graph,
    order: &EliminationOrder,
    labels: &[String],
    comments: &[String],
    output: Option<&Path>,
) -> Result<()> {
    let recomputed = fill_in_cost(g, &order.pi)?;
    if recomputed != order.fill_cost {
        return Err(Error::Contract(format!(
            "ordering claims fill {} but produces {recomputed}",
            order.fill_cost
        )));
    }
    let text = io::format_ordering(order, labels, comments);
    match output {
        Some(p) => {
            fs::write(p, text)?;
            println!("fill={}", order.fill_cost);
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn random_order(g: &Graph, restarts: usize, seed: u64) -> Result<EliminationOrder> {
    let mut best: Option<EliminationOrder> = None;
    for i in 0..restarts.max(1) {
        let mut pi: Vec<usize> = (0..g.n()).collect();
        pi.shuffle(&mut rng::stream(seed, i as u64));
        let fill_cost = fill_in_cost(g, &pi)?;
        if best.as_ref().is_none_or(|b| fill_cost < b.fill_cost) {
            best = Some(EliminationOrder { pi, fill_cost });
        }
    }
    Ok(best.expect("at least one restart"))
}

fn cmd_order(a: OrderArgs) -> Result<()> {
    let loaded = load(&a.input, a.input_args.format)?;
    let g = Arc::new(loaded.graph);
    let rule = |r| {
        if a.restarts > 1 {
            best_of_restarts(&g, r, a.restarts, a.seed, Execution::Parallel)
        } else {
            let tie = match a.tie {
                Tie::Lowest => TieBreak::LowestId,
                Tie::Random => TieBreak::Random(a.seed),
            };
            heuristic_order(&g, r, tie)
        }
    };
    let order = match a.method {
        Method::Mdh => rule(Rule::MinDegree),
        Method::Mfillh => rule(Rule::MinFill),
        Method::Random => random_order(&g, a.restarts, a.seed)?,
        Method::Policy => {
            let path = a
                .checkpoint
                .as_ref()
                .ok_or_else(|| Error::Config("--method policy needs --checkpoint".into()))?;
            let params = PolicyParams::load(path)?;
            let cfg = EvalConfig {
                samples: a.samples,
                seed: a.seed,
                ..EvalConfig::default()
            };
            policy_best_order(&params, &g, &cfg, 0)?
        }
    };
    let comments = vec![format!(
        "config input={} method={:?} restarts={} tie={:?} seed={} samples={}",
        a.input.display(),
        a.method,
        a.restarts,
        a.tie,
        a.seed,
        a.samples
    )
    .to_lowercase()];
    emit_ordering(&g, &order, &loaded.labels, &comments, a.output.as_deref())
}

fn parse_gnp(spec: &[String]) -> Result<(usize, f64, usize)> {
    let bad = |what: &str, v: &str| Error::Config(format!("--gnp {what}: cannot parse {v:?}"));
    let n = spec[0].replace('_', "").parse().map_err(|_| bad("N", &spec[0]))?;
    let p = spec[1].parse().map_err(|_| bad("P", &spec[1]))?;
    let count = spec[2].replace('_', "").parse().map_err(|_| bad("COUNT", &spec[2]))?;
    Ok((n, p, count))
}

/// Instance name, graph and vertex labels.
type Instance = (String, Arc<Graph>, Vec<String>);

/// Named graphs and labels from files plus generated `G(n, p)` instances.
fn collect_instances(
    inputs: &[PathBuf],
    format: Format,
    gnp: Option<&Vec<String>>,
    gnp_seed: u64,
) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for path in inputs {
        let l = load(path, format)?;
        out.push((path.display().to_string(), Arc::new(l.graph), l.labels));
    }
    if let Some(spec) = gnp {
        let (n, p, count) = parse_gnp(spec)?;
        for i in 0..count as u64 {
            let seed = gnp_seed.wrapping_add(i);
            out.push((format!("gnp_{n}_{p}_{seed}"), Arc::new(gen_gnp(n, p, seed)?), numeric_labels(n)));
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no input graphs (give paths or --gnp)".into()));
    }
    Ok(out)
}

fn execution(single_threaded: bool) -> Execution {
    if single_threaded {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let instances = collect_instances(&a.inputs, a.input_args.format, a.gnp.as_ref(), a.seed)?;
    let cfg = TrainConfig {
        total_timesteps: a.total_timesteps,
        parallel_envs: a.parallel_envs,
        learning_rate: a.learning_rate,
        node_dim: a.node_dim,
        policy_sizes: a.policy_sizes,
        ent_coef: a.ent_coef,
        action_masking: a.action_masking,
        clip_epsilon: a.clip_range,
        gamma: a.gamma,
        gae_lambda: a.gae_lambda,
        rollout_length: a.rollout_length,
        epochs_per_update: a.n_epochs,
        minibatch_size: a.minibatch_size,
        value_coef: a.vf_coef,
        max_grad_norm: a.max_grad_norm,
        seed: a.seed,
        adjacency: a.adjacency.parse()?,
        execution: execution(a.single_threaded),
    };
    let graphs: Vec<Arc<Graph>> = instances.iter().map(|(_, g, _)| Arc::clone(g)).collect();
    let artifacts = TrainArtifacts {
        prefix: a.output_file.clone(),
        labels: Some(instances.iter().map(|(_, _, l)| l.clone()).collect()),
    };
    if let Some(dir) = a.output_file.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let out = train(&cfg, &graphs, Some(&artifacts))?;
    println!("timesteps={}", out.timesteps);
    for (gi, (name, g, _)) in instances.iter().enumerate() {
        match &out.best[gi] {
            Some(order) => {
                fill_in_cost(g, &order.pi)?;
                println!("{name}: best fill {}", order.fill_cost);
            }
            None => println!("{name}: no finished episode"),
        }
    }
    println!("checkpoint {}", artifacts.checkpoint_path().display());
    println!("log {}", artifacts.log_path().display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let params = PolicyParams::load(&a.checkpoint)?;
    let instances = collect_instances(&a.inputs, a.input_args.format, a.gnp.as_ref(), a.gnp_seed)?;
    let cfg = EvalConfig {
        samples: a.samples,
        greedy: a.greedy,
        restarts: a.restarts,
        seed: a.seed,
        execution: execution(a.single_threaded),
    };
    let named: Vec<(String, Arc<Graph>)> = instances.iter().map(|(n, g, _)| (n.clone(), Arc::clone(g))).collect();
    let report = evaluate(&params, &named, &cfg)?;
    for (row, (_, g)) in report.rows.iter().zip(&named) {
        if fill_in_cost(g, &row.learned_order)? != row.learned_fill {
            return Err(Error::Contract(format!("{}: reported fill does not match its ordering", row.name)));
        }
    }
    let echo = format!(
        "# config checkpoint={} samples={} greedy={} restarts={} seed={} instances={}",
        a.checkpoint.display(),
        cfg.samples,
        cfg.greedy,
        cfg.restarts,
        cfg.seed,
        named.len()
    );
    println!("{echo}");
    print!("{}", report.to_table());
    let k = report.rows.len() as f64;
    println!(
        "mean fill: learned {:.3}, mdh {:.3}, mfillh {:.3}",
        report.total_learned() as f64 / k,
        report.total_mdh() as f64 / k,
        report.total_mfillh() as f64 / k
    );
    if let Some(path) = &a.csv {
        fs::write(path, format!("{echo}\n{}", report.to_csv()))?;
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let loaded = load(&a.input, a.input_args.format)?;
    let order = exact_min_fill(&loaded.graph, a.limit)?;
    let comments = vec![format!("config input={} method=oracle limit={}", a.input.display(), a.limit)];
    emit_ordering(&loaded.graph, &order, &loaded.labels, &comments, a.output.as_deref())
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let g = match a.kind {
        GenKind::Grid { rows, cols } => gen_grid(rows, cols)?,
        GenKind::Gnp { n, p, seed } => gen_gnp(n, p, seed)?,
    };
    match &a.output {
        Some(p) => io::save_edge_list(p, &g, None),
        None => {
            print!("{}", io::format_edge_list(&g, None));
            Ok(())
        }
    }
}
