//! Skip-gram with negative sampling over a walk corpus.
//!
//! Training is sequential so a seed fixes the result bit for bit. The
//! per-pair loss for input vector `u`, positive output `o⁺` and negatives
//! `o⁻_k` is `−log σ(u·o⁺) − Σ_k log σ(−u·o⁻_k)`.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::walks::WalkCorpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkipGramParams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Starting learning rate, decayed linearly to `lr · 1e-4`.
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipGramParams {
    fn default() -> Self {
        SkipGramParams {
            dim: 128,
            window: 10,
            negatives: 5,
            epochs: 1,
            lr: 0.025,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub lr: f64,
    pub window: usize,
    pub negatives: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub node_ids: Vec<String>,
    pub vectors: Array2<f64>,
    pub meta: TrainingMeta,
}

impl EmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn n_nodes(&self) -> usize {
        self.vectors.nrows()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^{-x})` without overflow.
#[inline]
fn softplus_neg(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss of one input vector against outputs labeled 1 (positive) or 0 (negative).
pub fn pair_loss(input: &[f64], outputs: &[&[f64]], labels: &[bool]) -> f64 {
    outputs
        .iter()
        .zip(labels)
        .map(|(o, &l)| {
            let s = dot(input, o);
            if l {
                softplus_neg(s)
            } else {
                softplus_neg(-s)
            }
        })
        .sum()
}

/// Gradients of [`pair_loss`] with respect to the input and to every output.
pub fn pair_gradients(input: &[f64], outputs: &[&[f64]], labels: &[bool]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut g_in = vec![0.0; input.len()];
    let mut g_out = Vec::with_capacity(outputs.len());
    for (o, &l) in outputs.iter().zip(labels) {
        let g = sigmoid(dot(input, o)) - if l { 1.0 } else { 0.0 };
        for (gi, oi) in g_in.iter_mut().zip(o.iter()) {
            *gi += g * oi;
        }
        g_out.push(input.iter().map(|u| g * u).collect());
    }
    (g_in, g_out)
}

/// Initial input vectors, uniform in `±0.5 / dim`.
pub fn initial_vectors(n: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 / dim as f64;
    Array2::from_shape_simple_fn((n, dim), || rng.random_range(-half..half))
}

pub fn skipgram_train(corpus: &WalkCorpus, node_ids: &[String], params: &SkipGramParams) -> Result<EmbeddingMatrix> {
    if params.dim == 0 {
        return Err(Error::InvalidParameter("embedding dimension must be positive".into()));
    }
    if params.window == 0 {
        return Err(Error::InvalidParameter("window must be positive".into()));
    }
    if corpus.walks.is_empty() {
        return Err(Error::InvalidParameter("empty walk corpus".into()));
    }
    let n = corpus.n_nodes;
    if node_ids.len() != n {
        return Err(Error::Dimension(format!("{} ids for {n} nodes", node_ids.len())));
    }
    let dim = params.dim;
    let mut syn0 = initial_vectors(n, dim, params.seed);
    let mut syn1 = Array2::<f64>::zeros((n, dim));
    let meta = TrainingMeta {
        epochs: params.epochs,
        lr: params.lr,
        window: params.window,
        negatives: params.negatives,
        seed: params.seed,
    };

    let mut counts = vec![0.0f64; n];
    for w in &corpus.walks {
        for &v in w {
            counts[v] += 1.0;
        }
    }
    let noise = WeightedIndex::new(counts.iter().map(|c| c.powf(0.75)))
        .map_err(|e| Error::InvalidParameter(format!("negative-sampling table: {e}")))?;

    let tokens: usize = corpus.walks.iter().map(Vec::len).sum();
    let total = (tokens * params.epochs).max(1) as f64;
    let mut processed = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(1));
    let mut grad_in = vec![0.0; dim];
    let s0 = syn0.as_slice_mut().expect("standard layout");
    let s1 = syn1.as_slice_mut().expect("standard layout");

    for _ in 0..params.epochs {
        for walk in &corpus.walks {
            for (i, &center) in walk.iter().enumerate() {
                let lr = params.lr * (1.0 - processed as f64 / total).max(1e-4);
                processed += 1;
                let reach = params.window - rng.random_range(0..params.window);
                let lo = i.saturating_sub(reach);
                let hi = (i + reach).min(walk.len() - 1);
                for (j, &context) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let u = center * dim;
                    grad_in.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=params.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let o = target * dim;
                        let s = dot(&s0[u..u + dim], &s1[o..o + dim]);
                        let g = lr * (label - sigmoid(s));
                        for t in 0..dim {
                            grad_in[t] += g * s1[o + t];
                            s1[o + t] += g * s0[u + t];
                        }
                    }
                    for t in 0..dim {
                        s0[u + t] += grad_in[t];
                    }
                }
            }
        }
    }

    if syn0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("training diverged; lower the learning rate".into()));
    }
    Ok(EmbeddingMatrix {
        node_ids: node_ids.to_vec(),
        vectors: syn0,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::walks::WalkParams;

    fn corpus(walks: Vec<Vec<usize>>, n: usize) -> WalkCorpus {
        WalkCorpus {
            walks,
            n_nodes: n,
            params: WalkParams::default(),
        }
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let c = corpus(vec![vec![0, 1, 2]], 3);
        let params = SkipGramParams {
            dim: 4,
            epochs: 0,
            seed: 7,
            ..Default::default()
        };
        let e = skipgram_train(&c, &ids(3), &params).unwrap();
        assert_eq!(e.vectors, initial_vectors(3, 4, 7));
    }

    #[test]
    fn rejects_bad_params() {
        let c = corpus(vec![vec![0, 1]], 2);
        let bad_dim = SkipGramParams { dim: 0, ..Default::default() };
        let bad_window = SkipGramParams { window: 0, ..Default::default() };
        assert!(skipgram_train(&c, &ids(2), &bad_dim).is_err());
        assert!(skipgram_train(&c, &ids(2), &bad_window).is_err());
        assert!(skipgram_train(&corpus(vec![], 2), &ids(2), &SkipGramParams::default()).is_err());
    }

    #[test]
    fn loss_matches_closed_form() {
        let u = [0.5, -1.0];
        let o = [2.0, 0.25];
        let s: f64 = 0.5 * 2.0 - 0.25;
        let expect = -(1.0 / (1.0 + (-s).exp())).ln() - (1.0 / (1.0 + s.exp())).ln();
        let loss = pair_loss(&u, &[&o, &o], &[true, false]);
        assert!((loss - expect).abs() < 1e-14);
    }

    #[test]
    fn seeded_training_is_deterministic() {
        let c = corpus(vec![vec![0, 1, 2, 1, 0], vec![2, 3, 2, 1]], 4);
        let params = SkipGramParams {
            dim: 8,
            epochs: 3,
            seed: 2,
            ..Default::default()
        };
        let a = skipgram_train(&c, &ids(4), &params).unwrap();
        let b = skipgram_train(&c, &ids(4), &params).unwrap();
        assert_eq!(a, b);
    }
}
