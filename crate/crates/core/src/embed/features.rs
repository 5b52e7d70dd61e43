use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::skipgram::EmbeddingMatrix;
use crate::error::{Error, Result};

/// How two node vectors are combined into one pair feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    #[default]
    Hadamard,
    /// `[z_lo | z_hi]` with the lower node index first.
    Concat,
}

pub fn edge_features(e: &EmbeddingMatrix, pairs: &[(usize, usize)], combiner: Combiner) -> Result<Array2<f64>> {
    let n = e.n_nodes();
    let d = e.dim();
    let width = match combiner {
        Combiner::Hadamard => d,
        Combiner::Concat => 2 * d,
    };
    let mut out = Array2::zeros((pairs.len(), width));
    for (r, &(u, v)) in pairs.iter().enumerate() {
        if u >= n || v >= n {
            return Err(Error::InvalidParameter(format!("pair ({u}, {v}) out of range for {n} nodes")));
        }
        let (zu, zv) = (e.vectors.row(u), e.vectors.row(v));
        match combiner {
            Combiner::Hadamard => out.row_mut(r).assign(&(&zu * &zv)),
            Combiner::Concat => {
                let (lo, hi) = if u <= v { (zu, zv) } else { (zv, zu) };
                out.slice_mut(s![r, ..d]).assign(&lo);
                out.slice_mut(s![r, d..]).assign(&hi);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::skipgram::TrainingMeta;
    use ndarray::array;

    fn emb(vectors: Array2<f64>) -> EmbeddingMatrix {
        EmbeddingMatrix {
            node_ids: (0..vectors.nrows()).map(|i| i.to_string()).collect(),
            vectors,
            meta: TrainingMeta {
                epochs: 0,
                lr: 0.0,
                window: 1,
                negatives: 0,
                seed: 0,
            },
        }
    }

    #[test]
    fn hadamard_values() {
        let e = emb(array![[1.0, 2.0], [3.0, 4.0]]);
        let f = edge_features(&e, &[(0, 1), (1, 1)], Combiner::Hadamard).unwrap();
        assert_eq!(f, array![[3.0, 8.0], [9.0, 16.0]]);
    }

    #[test]
    fn concat_is_canonical() {
        let e = emb(array![[1.0, 2.0], [3.0, 4.0]]);
        let f = edge_features(&e, &[(0, 1), (1, 0)], Combiner::Concat).unwrap();
        assert_eq!(f.ncols(), 4);
        assert_eq!(f.row(0), f.row(1));
        assert_eq!(f.row(0), array![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn out_of_range() {
        let e = emb(array![[1.0]]);
        assert!(edge_features(&e, &[(0, 1)], Combiner::Hadamard).is_err());
    }
}
