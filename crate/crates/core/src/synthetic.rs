//! Random attributed graphs with planted sensitive groups, for tests and demos.

use ndarray::Array2;
use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPartition {
    pub group_sizes: Vec<usize>,
    pub attr_dim: usize,
    /// Edge probability inside a group.
    pub p_in: f64,
    /// Edge probability across groups.
    pub p_out: f64,
    /// Base probability of a binary attribute being on.
    pub attr_base: f64,
    /// Extra probability on the attribute columns owned by a node's group.
    pub attr_shift: f64,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        PlantedPartition {
            group_sizes: vec![20, 20],
            attr_dim: 8,
            p_in: 0.3,
            p_out: 0.05,
            attr_base: 0.1,
            attr_shift: 0.5,
        }
    }
}

/// Samples a homophilous graph: nodes are laid out group by group, edges
/// appear independently with `p_in` or `p_out`, and attribute column `t`
/// belongs to group `t mod k`.
pub fn planted_partition(spec: &PlantedPartition, seed: u64) -> Result<Graph> {
    let probs = [spec.p_in, spec.p_out, spec.attr_base, spec.attr_base + spec.attr_shift];
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParameter("probabilities must lie in [0, 1]".into()));
    }
    let sensitive: Vec<usize> = spec
        .group_sizes
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| std::iter::repeat_n(k, n))
        .collect();
    let n = sensitive.len();
    let k = spec.group_sizes.len().max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Bernoulli::new(spec.attr_base).expect("checked");
    let owned = Bernoulli::new(spec.attr_base + spec.attr_shift).expect("checked");
    let attributes = Array2::from_shape_fn((n, spec.attr_dim), |(i, t)| {
        let d = if t % k == sensitive[i] { &owned } else { &base };
        if d.sample(&mut rng) {
            1.0
        } else {
            0.0
        }
    });
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if sensitive[u] == sensitive[v] { spec.p_in } else { spec.p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    Graph::from_edges((0..n).map(|i| format!("v{i}")).collect(), attributes, sensitive, &edges)
}
