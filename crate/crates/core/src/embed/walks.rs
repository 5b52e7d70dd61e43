//! Second-order biased random walks.
//!
//! From current node `v` having arrived from `t`, candidate `x` is weighted
//! `w(v, x) · α(t, x)` with `α = 1/p` when `x = t`, `1` when `x` neighbors `t`
//! and `1/q` otherwise. Every walk has its own ChaCha stream, so the corpus is
//! identical whatever the thread count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Edge weights at or below this are treated as absent.
pub const MIN_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub num_walks: usize,
    /// Number of nodes per walk, including the start.
    pub walk_length: usize,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            num_walks: 10,
            walk_length: 80,
            p: 1.0,
            q: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<usize>>,
    pub n_nodes: usize,
    pub params: WalkParams,
}

struct Neighbors {
    nodes: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
}

impl Neighbors {
    fn new(g: &Graph) -> Self {
        let a = g.adjacency();
        let mut nodes = Vec::with_capacity(g.n_nodes());
        let mut cumulative = Vec::with_capacity(g.n_nodes());
        for row in a.rows() {
            let mut ns = Vec::new();
            let mut cs = Vec::new();
            let mut acc = 0.0;
            for (x, &w) in row.iter().enumerate() {
                if w > MIN_WEIGHT {
                    acc += w;
                    ns.push(x);
                    cs.push(acc);
                }
            }
            nodes.push(ns);
            cumulative.push(cs);
        }
        Neighbors { nodes, cumulative }
    }

    /// Draws a neighbor of `v` proportionally to edge weight.
    fn sample(&self, v: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
        let cum = &self.cumulative[v];
        let total = *cum.last()?;
        let r = rng.random::<f64>() * total;
        let k = cum.partition_point(|&c| c <= r).min(cum.len() - 1);
        Some(self.nodes[v][k])
    }
}

fn bias(g: &Graph, prev: usize, x: usize, p: f64, q: f64) -> f64 {
    if x == prev {
        1.0 / p
    } else if g.adjacency()[[prev, x]] > MIN_WEIGHT {
        1.0
    } else {
        1.0 / q
    }
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("p and q must be positive, got p={p}, q={q}")));
    }
    Ok(())
}

/// Exact next-step distribution from `current`, having arrived from `prev`.
pub fn transition_probabilities(g: &Graph, prev: Option<usize>, current: usize, p: f64, q: f64) -> Result<Vec<(usize, f64)>> {
    check_pq(p, q)?;
    let a = g.adjacency();
    let mut out: Vec<(usize, f64)> = a
        .row(current)
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > MIN_WEIGHT)
        .map(|(x, &w)| (x, w * prev.map_or(1.0, |t| bias(g, t, x, p, q))))
        .collect();
    let total: f64 = out.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut out {
        *w /= total;
    }
    Ok(out)
}

fn walk(g: &Graph, nb: &Neighbors, start: usize, params: &WalkParams, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut path = Vec::with_capacity(params.walk_length);
    path.push(start);
    if params.walk_length < 2 {
        return path;
    }
    let Some(first) = nb.sample(start, rng) else {
        return path;
    };
    path.push(first);
    let unbiased = params.p == 1.0 && params.q == 1.0;
    let max_bias = (1.0 / params.p).max(1.0).max(1.0 / params.q);
    while path.len() < params.walk_length {
        let v = path[path.len() - 1];
        let t = path[path.len() - 2];
        let next = loop {
            let Some(x) = nb.sample(v, rng) else {
                return path;
            };
            if unbiased || rng.random::<f64>() * max_bias < bias(g, t, x, params.p, params.q) {
                break x;
            }
        };
        path.push(next);
    }
    path
}

/// `num_walks` rounds of one walk from every node, node order shuffled per round.
pub fn random_walks(g: &Graph, params: &WalkParams) -> Result<WalkCorpus> {
    check_pq(params.p, params.q)?;
    if params.walk_length == 0 {
        return Err(Error::InvalidParameter("walk length must be positive".into()));
    }
    let n = g.n_nodes();
    let nb = Neighbors::new(g);
    let mut order_rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut jobs = Vec::with_capacity(n * params.num_walks);
    for round in 0..params.num_walks {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut order_rng);
        jobs.extend(order.into_iter().map(|v| (round, v)));
    }
    let walks = jobs
        .par_iter()
        .map(|&(round, start)| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream((round * n + start) as u64 + 1);
            walk(g, &nb, start, params, &mut rng)
        })
        .collect();
    Ok(WalkCorpus {
        walks,
        n_nodes: n,
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> Graph {
        Graph::from_edges(
            (0..n).map(|i| i.to_string()).collect(),
            Array2::zeros((n, 1)),
            (0..n).map(|i| i % 2).collect(),
            edges,
        )
        .unwrap()
    }

    #[test]
    fn path_graph_step_goes_to_a_neighbor() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let params = WalkParams {
            num_walks: 20,
            walk_length: 2,
            ..Default::default()
        };
        let corpus = random_walks(&g, &params).unwrap();
        for w in corpus.walks.iter().filter(|w| w[0] == 1) {
            assert_eq!(w.len(), 2);
            assert!(w[1] == 0 || w[1] == 2);
        }
    }

    #[test]
    fn isolated_node_gives_singleton() {
        let g = graph(3, &[(0, 1, 1.0)]);
        let corpus = random_walks(&g, &WalkParams::default()).unwrap();
        assert!(corpus.walks.iter().filter(|w| w[0] == 2).all(|w| w == &vec![2]));
    }

    #[test]
    fn weighted_step_frequencies() {
        let g = graph(3, &[(0, 1, 1.0), (0, 2, 0.5), (1, 2, 1.0)]);
        let nb = Neighbors::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 10_000;
        let hits = (0..draws).filter(|_| nb.sample(0, &mut rng) == Some(1)).count();
        let p = 2.0 / 3.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - draws as f64 * p).abs() < 3.0 * sigma);
    }

    #[test]
    fn second_order_bias() {
        // square 0-1-2-3 plus chord 1-3
        let g = graph(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0), (1, 3, 1.0)]);
        let probs = transition_probabilities(&g, Some(0), 1, 2.0, 0.5).unwrap();
        // from 1 after 0: back to 0 (1/p = .5), to 3 (neighbor of 0, 1), to 2 (1/q = 2)
        let total = 0.5 + 1.0 + 2.0;
        assert_eq!(probs, vec![(0, 0.5 / total), (2, 2.0 / total), (3, 1.0 / total)]);
    }

    #[test]
    fn rejects_non_positive_pq() {
        let g = graph(2, &[(0, 1, 1.0)]);
        let params = WalkParams {
            p: 0.0,
            ..Default::default()
        };
        assert!(random_walks(&g, &params).is_err());
    }

    #[test]
    fn walks_follow_edges_and_are_seeded() {
        let g = graph(6, &[(0, 1, 1.0), (1, 2, 0.3), (2, 3, 1.0), (3, 4, 0.7), (4, 5, 1.0), (5, 0, 1.0)]);
        let params = WalkParams {
            num_walks: 3,
            walk_length: 12,
            p: 0.5,
            q: 2.0,
            seed: 5,
        };
        let a = random_walks(&g, &params).unwrap();
        let b = random_walks(&g, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.walks.len(), 18);
        for w in &a.walks {
            assert_eq!(w.len(), 12);
            for pair in w.windows(2) {
                assert!(g.adjacency()[[pair[0], pair[1]]] > 0.0);
            }
        }
    }
}
