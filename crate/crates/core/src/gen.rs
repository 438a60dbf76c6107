//! Instance generators.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

/// `rows x cols` lattice with 4-neighbor edges; vertex `(r, c)` has id `r * cols + c`.
pub fn gen_grid(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 {
        return Err(Error::Config(format!("grid dimensions must be positive, got {rows}x{cols}")));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    Graph::from_edges(rows * cols, edges)
}

/// Erdős–Rényi `G(n, p)`: pairs `(u, v)`, `u < v`, are visited in
/// lexicographic order and each kept when a uniform `[0, 1)` draw is below `p`.
pub fn gen_gnp(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Config("G(n, p) needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("edge probability {p} is outside [0, 1]")));
    }
    let mut rng = rng::seeded(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        let g = gen_grid(5, 5).unwrap();
        assert_eq!((g.n(), g.num_edges()), (25, 40));
        let g = gen_grid(10, 10).unwrap();
        assert_eq!((g.n(), g.num_edges()), (100, 180));
        let g = gen_grid(1, 1).unwrap();
        assert_eq!((g.n(), g.num_edges()), (1, 0));
        let g = gen_grid(2, 3).unwrap();
        assert!(g.has_edge(1, 4) && g.has_edge(4, 5) && !g.has_edge(2, 3));
        assert!(gen_grid(0, 3).is_err());
    }

    #[test]
    fn gnp_extremes_and_determinism() {
        assert_eq!(gen_gnp(10, 0.0, 1).unwrap().num_edges(), 0);
        assert_eq!(gen_gnp(10, 1.0, 1).unwrap().num_edges(), 45);
        assert_eq!(gen_gnp(30, 0.3, 8).unwrap(), gen_gnp(30, 0.3, 8).unwrap());
        assert_ne!(gen_gnp(30, 0.3, 8).unwrap(), gen_gnp(30, 0.3, 9).unwrap());
        assert!(gen_gnp(5, 1.5, 0).is_err());
        assert!(gen_gnp(0, 0.5, 0).is_err());
    }

    #[test]
    fn gnp_mean_edge_count_matches_binomial() {
        // m ~ Binomial(1225, 0.2): mean 245, sd sqrt(1225 * 0.16) = 14
        let seeds = 1000;
        let total: usize = (0..seeds).map(|s| gen_gnp(50, 0.2, s).unwrap().num_edges()).sum();
        let mean = total as f64 / seeds as f64;
        let sigma = (1225.0f64 * 0.2 * 0.8).sqrt();
        let tol = 3.0 * sigma / (seeds as f64).sqrt();
        assert!((mean - 245.0).abs() <= tol, "mean {mean}, tolerance {tol}");
    }
}
