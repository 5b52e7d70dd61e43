use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assortativity {
    pub value: f64,
    /// Every edge weight falls in a single category pair and the coefficient
    /// is reported as 1 by convention.
    pub degenerate: bool,
}

/// Weighted mixing matrix over the sensitive categories, each undirected
/// edge counted once per direction, normalized to sum to one.
pub fn mixing_matrix(g: &Graph) -> Result<Array2<f64>> {
    let index: BTreeMap<usize, usize> = g.groups().into_iter().enumerate().map(|(i, k)| (k, i)).collect();
    let k = index.len();
    let s: Vec<usize> = g.sensitive().iter().map(|v| index[v]).collect();
    let a = g.adjacency();
    let mut e = Array2::<f64>::zeros((k, k));
    for ((u, v), &w) in a.indexed_iter() {
        if u != v && w > 0.0 {
            // average of the two directions keeps asymmetric inputs symmetric
            e[[s[u], s[v]]] += 0.5 * w;
            e[[s[v], s[u]]] += 0.5 * w;
        }
    }
    let total = e.sum();
    if total <= 0.0 {
        return Err(Error::Undefined("assortativity needs at least one edge".into()));
    }
    Ok(e / total)
}

/// Newman's categorical assortativity `r = (Σ e_ii − Σ a_i b_i) / (1 − Σ a_i b_i)`.
pub fn assortativity(g: &Graph) -> Result<Assortativity> {
    let e = mixing_matrix(g)?;
    Ok(assortativity_from_mixing(&e))
}

pub fn assortativity_from_mixing(e: &Array2<f64>) -> Assortativity {
    let trace: f64 = e.diag().sum();
    let a = e.sum_axis(ndarray::Axis(1));
    let b = e.sum_axis(ndarray::Axis(0));
    let ab: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
    let denom = 1.0 - ab;
    if denom.abs() < 1e-15 {
        return Assortativity {
            value: 1.0,
            degenerate: true,
        };
    }
    Assortativity {
        value: ((trace - ab) / denom).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn graph(sensitive: Vec<usize>, edges: &[(usize, usize, f64)]) -> Graph {
        let n = sensitive.len();
        Graph::from_edges(
            (0..n).map(|i| i.to_string()).collect(),
            Array2::zeros((n, 1)),
            sensitive,
            edges,
        )
        .unwrap()
    }

    #[test]
    fn intra_only_is_one() {
        let g = graph(vec![0, 0, 1, 1], &[(0, 1, 1.0), (2, 3, 1.0)]);
        let r = assortativity(&g).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(!r.degenerate);
    }

    #[test]
    fn single_category_edges_are_flagged() {
        let g = graph(vec![0, 0, 1], &[(0, 1, 1.0)]);
        let r = assortativity(&g).unwrap();
        assert_eq!(r, Assortativity { value: 1.0, degenerate: true });
    }

    #[test]
    fn uniform_mixing_is_zero() {
        let g = graph(vec![0, 0, 1, 1], &[(0, 1, 1.0), (2, 3, 1.0), (0, 2, 1.0), (1, 3, 1.0)]);
        assert_eq!(mixing_matrix(&g).unwrap(), array![[0.25, 0.25], [0.25, 0.25]]);
        assert_eq!(assortativity(&g).unwrap().value, 0.0);
    }

    #[test]
    fn no_edges_is_an_error() {
        assert!(assortativity(&graph(vec![0, 1], &[])).is_err());
    }
}
