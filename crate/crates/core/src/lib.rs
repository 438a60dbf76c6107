//! Fill-reducing elimination orderings for sparse symmetric matrices.
//!
//! The crate simulates vertex elimination on undirected graphs, provides the
//! minimum-degree and minimum-fill greedy heuristics, an exact solver for
//! small graphs, and a graph-convolutional policy trained with masked PPO to
//! choose the next vertex.
//!
//! ```
//! use fillorder::{gen::gen_grid, heuristics::{mdh_order, TieBreak}, elim::fill_in_cost};
//!
//! let g = gen_grid(4, 4).unwrap();
//! let order = mdh_order(&g, TieBreak::LowestId);
//! assert_eq!(fill_in_cost(&g, &order.pi).unwrap(), order.fill_cost);
//! ```

pub mod elim;
pub mod env;
pub mod error;
pub mod eval;
pub mod gen;
pub mod graph;
pub mod heuristics;
pub mod io;
pub mod oracle;
pub mod par;
pub mod policy;
pub mod ppo;
pub mod rng;

pub use elim::{fill_in_cost, ElimState, EliminationOrder};
pub use error::{Error, Result};
pub use graph::Graph;
pub use par::Execution;
