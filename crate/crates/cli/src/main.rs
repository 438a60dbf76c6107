//! `fillorder` command-line tool.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use fillorder::io::Format;
use fillorder::Error;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage or configuration error
  3  input parse error
  4  contract error (invalid ordering, action, oversized instance, empty graph)
  5  I/O or checkpoint error
  6  training diverged (non-finite loss)";

#[derive(Parser, Debug)]
#[command(name = "fillorder", version, about = "Low-fill elimination orderings for sparse symmetric graphs")]
#[command(after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute an elimination ordering with a heuristic or a trained policy.
    Order(OrderArgs),
    /// Train a policy with masked PPO.
    Train(TrainArgs),
    /// Compare a trained policy against the greedy baselines.
    Eval(EvalArgs),
    /// Exact minimum fill for small graphs.
    Oracle(OracleArgs),
    /// Generate benchmark graphs.
    Gen(GenArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Mdh,
    Mfillh,
    Random,
    Policy,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Tie {
    Lowest,
    Random,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Integers may use `_` separators (`500_000`).
fn parse_count(s: &str) -> Result<usize, String> {
    s.replace('_', "").parse().map_err(|e| format!("{e}"))
}

fn parse_flag(s: &str) -> Result<bool, String> {
    match s {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(format!("expected 0 or 1, got {s:?}")),
    }
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Input format: auto, edgelist or matrix-pattern.
    #[arg(long, default_value = "auto", value_parser = parse_format)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct OrderArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub input_args: InputArgs,
    #[arg(long, value_enum, default_value_t = Method::Mdh)]
    pub method: Method,
    /// Best of this many runs; runs after the first use random tie-breaking.
    #[arg(long, default_value_t = 1, value_parser = parse_count)]
    pub restarts: usize,
    #[arg(long, value_enum, default_value_t = Tie::Lowest)]
    pub tie: Tie,
    #[arg(long, env = "FILLORDER_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Policy checkpoint (method policy).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Sampled rollouts for method policy, in addition to one greedy rollout.
    #[arg(long, default_value_t = 25, value_parser = parse_count)]
    pub samples: usize,
    /// Ordering file to write; printed to stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training graphs; environment i trains on graph i modulo the count.
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub input_args: InputArgs,
    /// Generate COUNT training graphs G(N, P) with seeds seed, seed+1, ...
    #[arg(long, num_args = 3, value_names = ["N", "P", "COUNT"])]
    pub gnp: Option<Vec<String>>,
    #[arg(long = "total_timesteps", default_value = "500_000", value_parser = parse_count)]
    pub total_timesteps: usize,
    #[arg(long = "learning_rate", default_value_t = 1e-4)]
    pub learning_rate: f64,
    #[arg(long = "parallel_envs", default_value_t = 5, value_parser = parse_count)]
    pub parallel_envs: usize,
    #[arg(long = "node_dim", default_value_t = 32, value_parser = parse_count)]
    pub node_dim: usize,
    /// Hidden widths of the value network; may be given with no values.
    #[arg(long = "policy_sizes", num_args = 0.., value_parser = parse_count)]
    pub policy_sizes: Vec<usize>,
    #[arg(long = "ent_coef", default_value_t = 0.0)]
    pub ent_coef: f64,
    #[arg(long = "action_masking", default_value = "1", value_parser = parse_flag, action = ArgAction::Set)]
    pub action_masking: bool,
    /// Artifact prefix: PREFIX.ckpt.json, PREFIX.log.csv, PREFIX.order.
    #[arg(long = "output_file", default_value = "fillorder_run")]
    pub output_file: PathBuf,
    #[arg(long, env = "FILLORDER_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Steps per environment per update [default: 2048 / parallel_envs].
    #[arg(long = "rollout_length", value_parser = parse_count)]
    pub rollout_length: Option<usize>,
    #[arg(long = "minibatch_size", default_value_t = 64, value_parser = parse_count)]
    pub minibatch_size: usize,
    #[arg(long = "n_epochs", default_value_t = 10, value_parser = parse_count)]
    pub n_epochs: usize,
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
    #[arg(long = "gae_lambda", default_value_t = 0.95)]
    pub gae_lambda: f64,
    #[arg(long = "clip_range", default_value_t = 0.2)]
    pub clip_range: f64,
    #[arg(long = "vf_coef", default_value_t = 0.5)]
    pub vf_coef: f64,
    #[arg(long = "max_grad_norm", default_value_t = 0.5)]
    pub max_grad_norm: f64,
    /// Message-passing adjacency: current (with fill) or original.
    #[arg(long, default_value = "current")]
    pub adjacency: String,
    /// Run everything on the calling thread.
    #[arg(long = "single_threaded")]
    pub single_threaded: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub input_args: InputArgs,
    /// Evaluate on COUNT fresh G(N, P) graphs with seeds gnp_seed, gnp_seed+1, ...
    #[arg(long, num_args = 3, value_names = ["N", "P", "COUNT"])]
    pub gnp: Option<Vec<String>>,
    #[arg(long = "gnp_seed", default_value_t = 1_000_000)]
    pub gnp_seed: u64,
    #[arg(long, default_value_t = 25, value_parser = parse_count)]
    pub samples: usize,
    /// Also take one greedy rollout (0 or 1).
    #[arg(long, default_value = "1", value_parser = parse_flag, action = ArgAction::Set)]
    pub greedy: bool,
    /// Random tie-break restarts for the baselines.
    #[arg(long, default_value_t = 64, value_parser = parse_count)]
    pub restarts: usize,
    #[arg(long, env = "FILLORDER_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the report as CSV here as well.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long = "single_threaded")]
    pub single_threaded: bool,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub input_args: InputArgs,
    #[arg(long, default_value_t = fillorder::oracle::DEFAULT_LIMIT)]
    pub limit: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(subcommand)]
    pub kind: GenKind,
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum GenKind {
    /// rows x cols lattice.
    Grid { rows: usize, cols: usize },
    /// Erdos-Renyi G(n, p).
    Gnp {
        n: usize,
        p: f64,
        #[arg(long, env = "FILLORDER_SEED", default_value_t = 0)]
        seed: u64,
    },
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Parse { .. } => 3,
        Error::InvalidVertex { .. }
        | Error::InvalidPermutation(_)
        | Error::NoVertices
        | Error::InstanceTooLarge { .. }
        | Error::InvalidAction { .. }
        | Error::Contract(_) => 4,
        Error::Io(_) | Error::Checkpoint(_) => 5,
        Error::NonFinite(_) => 6,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fillorder: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
