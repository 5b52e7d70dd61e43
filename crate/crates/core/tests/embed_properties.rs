use dyadicot::embed::skipgram::{pair_gradients, pair_loss};
use dyadicot::embed::{
    pca_project, random_walks, skipgram_train, transition_probabilities, SkipGramParams,
    WalkParams,
};
use dyadicot::graph::Graph;
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

fn two_cliques(size: usize) -> Graph {
    let mut edges = Vec::new();
    for c in 0..2 {
        for i in 0..size {
            for j in (i + 1)..size {
                edges.push((c * size + i, c * size + j, 1.0));
            }
        }
    }
    let n = 2 * size;
    let sensitive = (0..n).map(|i| i / size).collect();
    Graph::from_edges(ids(n), Array2::zeros((n, 1)), sensitive, &edges).unwrap()
}

fn random_graph(seed: u64, n: usize, p: f64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((u, v, rng.random_range(0.1..1.0)));
            }
        }
    }
    Graph::from_edges(ids(n), Array2::zeros((n, 1)), (0..n).map(|i| i % 2).collect(), &edges).unwrap()
}

#[test]
fn skipgram_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let dim = rng.random_range(1..=16);
        let k = rng.random_range(1..=6);
        let input: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let outputs: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<bool> = (0..k).map(|i| i == 0 || rng.random::<bool>()).collect();
        let refs = |o: &[Vec<f64>]| -> Vec<Vec<f64>> { o.to_vec() };
        let loss = |inp: &[f64], outs: &[Vec<f64>]| {
            let r: Vec<&[f64]> = outs.iter().map(|o| o.as_slice()).collect();
            pair_loss(inp, &r, &labels)
        };
        let r: Vec<&[f64]> = outputs.iter().map(|o| o.as_slice()).collect();
        let (g_in, g_out) = pair_gradients(&input, &r, &labels);
        for i in 0..dim {
            let (mut plus, mut minus) = (input.clone(), input.clone());
            plus[i] += h;
            minus[i] -= h;
            let fd = (loss(&plus, &outputs) - loss(&minus, &outputs)) / (2.0 * h);
            worst = worst.max(rel_err(g_in[i], fd));
        }
        for j in 0..k {
            for i in 0..dim {
                let (mut plus, mut minus) = (refs(&outputs), refs(&outputs));
                plus[j][i] += h;
                minus[j][i] -= h;
                let fd = (loss(&input, &plus) - loss(&input, &minus)) / (2.0 * h);
                worst = worst.max(rel_err(g_out[j][i], fd));
            }
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

fn cosine(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt())
}

#[test]
fn disconnected_cliques_separate() {
    let g = two_cliques(10);
    let corpus = random_walks(&g, &WalkParams { num_walks: 20, walk_length: 20, seed: 4, ..Default::default() }).unwrap();
    let params = SkipGramParams { dim: 16, window: 5, epochs: 5, seed: 4, ..Default::default() };
    let emb = skipgram_train(&corpus, g.node_ids(), &params).unwrap();
    let (mut intra, mut inter, mut ni, mut nx) = (0.0, 0.0, 0, 0);
    for u in 0..20 {
        for v in (u + 1)..20 {
            let c = cosine(emb.vectors.row(u), emb.vectors.row(v));
            if u / 10 == v / 10 {
                intra += c;
                ni += 1;
            } else {
                inter += c;
                nx += 1;
            }
        }
    }
    let (intra, inter) = (intra / ni as f64, inter / nx as f64);
    assert!(intra > inter + 0.2, "intra {intra} inter {inter}");
}

#[test]
fn pca_components_are_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let x = Array2::from_shape_fn((50, 7), |(i, j)| rng.random_range(-1.0..1.0) * (j + 1) as f64 + i as f64 * 0.01);
    let pca = pca_project(x.view(), 5).unwrap();
    let gram = pca.components.dot(&pca.components.t());
    for i in 0..5 {
        for j in 0..5 {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((gram[[i, j]] - target).abs() < 1e-8);
        }
    }
}

#[test]
fn pca_recovers_dominant_variance_share() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let wide = Normal::new(0.0, 3.0).unwrap();
    let narrow = Normal::new(0.0, 1.0).unwrap();
    let x = Array2::from_shape_fn((2000, 2), |(_, j)| if j == 0 { wide.sample(&mut rng) } else { narrow.sample(&mut rng) });
    let pca = pca_project(x.view(), 1).unwrap();
    let ratio = pca.explained_variance_ratio[0];
    assert!((ratio - 0.9).abs() <= 0.03, "{ratio}");
    assert!(pca.components[[0, 0]].abs() > 0.99);
}

#[test]
fn twin_nodes_share_transition_distributions() {
    // nodes 0 and 1 have the same neighbors {2, 3, 4} and are not adjacent
    let edges = [(0, 2, 1.0), (0, 3, 0.5), (0, 4, 0.8), (1, 2, 1.0), (1, 3, 0.5), (1, 4, 0.8), (2, 3, 1.0), (4, 5, 1.0)];
    let attrs = ndarray::array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [1.0, 1.0], [0.0, 0.0]];
    let g = Graph::from_edges(ids(6), attrs, vec![0, 0, 1, 1, 0, 1], &edges).unwrap();
    for (p, q) in [(1.0, 1.0), (0.5, 2.0), (4.0, 0.25)] {
        assert_eq!(
            transition_probabilities(&g, None, 0, p, q).unwrap(),
            transition_probabilities(&g, None, 1, p, q).unwrap()
        );
        for prev in [2, 3, 4] {
            assert_eq!(
                transition_probabilities(&g, Some(prev), 0, p, q).unwrap(),
                transition_probabilities(&g, Some(prev), 1, p, q).unwrap()
            );
        }
        // arriving at a shared neighbor from either twin looks the same
        let from0 = transition_probabilities(&g, Some(0), 2, p, q).unwrap();
        let from1 = transition_probabilities(&g, Some(1), 2, p, q).unwrap();
        let mut swapped: Vec<(usize, f64)> = from1
            .into_iter()
            .map(|(x, w)| (match x { 0 => 1, 1 => 0, x => x }, w))
            .collect();
        swapped.sort_by_key(|e| e.0);
        assert_eq!(from0, swapped);
    }
}

#[test]
fn seeded_embeddings_are_bitwise_reproducible() {
    let g = random_graph(9, 30, 0.2);
    let wp = WalkParams { num_walks: 4, walk_length: 15, p: 0.5, q: 2.0, seed: 17 };
    let sp = SkipGramParams { dim: 8, window: 3, seed: 17, ..Default::default() };
    let a = skipgram_train(&random_walks(&g, &wp).unwrap(), g.node_ids(), &sp).unwrap();
    let b = skipgram_train(&random_walks(&g, &wp).unwrap(), g.node_ids(), &sp).unwrap();
    assert_eq!(a.vectors, b.vectors);
    assert!(a.vectors.iter().all(|v| v.is_finite()));
    assert_eq!(a.vectors.len_of(Axis(0)), 30);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn walks_follow_edges(seed in any::<u64>(), n in 2usize..25, density in 0.05f64..0.6, p in 0.25f64..4.0, q in 0.25f64..4.0) {
        let g = random_graph(seed, n, density);
        let params = WalkParams { num_walks: 2, walk_length: 12, p, q, seed };
        let corpus = random_walks(&g, &params).unwrap();
        prop_assert_eq!(corpus.walks.len(), 2 * n);
        let a = g.adjacency();
        let mut starts = vec![0usize; n];
        for walk in &corpus.walks {
            starts[walk[0]] += 1;
            for pair in walk.windows(2) {
                prop_assert!(a[[pair[0], pair[1]]] > 0.0);
            }
            let isolated = a.row(walk[0]).iter().all(|&w| w <= 0.0);
            prop_assert_eq!(walk.len(), if isolated { 1 } else { 12 });
        }
        prop_assert!(starts.iter().all(|&c| c == 2));
    }

    #[test]
    fn transition_rows_are_distributions(seed in any::<u64>(), p in 0.25f64..4.0, q in 0.25f64..4.0) {
        let g = random_graph(seed, 12, 0.4);
        for v in 0..12 {
            let probs = transition_probabilities(&g, None, v, p, q).unwrap();
            if probs.is_empty() {
                continue;
            }
            let total: f64 = probs.iter().map(|x| x.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(probs.iter().all(|&(x, w)| w > 0.0 && g.adjacency()[[v, x]] > 0.0));
        }
    }
}
