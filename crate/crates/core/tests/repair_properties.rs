use dyadicot::graph::{split_groups, GroupView};
use dyadicot::metrics::xor_conditional_joints;
use dyadicot::ot::{
    cost_sqeuclidean, free_support_barycenter, init_support_from_pool, solve_exact, uniform, wasserstein,
    BarycenterParams, BlockSqEuclidean, Method,
};
use dyadicot::repair::{
    dyadic_cost, heterophily_dropout, repair_binary, repair_graph, repair_multiclass, RepairConfig, RepairMode,
};
use dyadicot::synthetic::{planted_partition, PlantedPartition};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sorted_rows(x: &Array2<f64>) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rows
}

fn w_sq(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let c = cost_sqeuclidean(a, b).unwrap();
    wasserstein(&c, uniform(a.nrows()).view(), uniform(b.nrows()).view(), &Method::exact()).unwrap()
}

fn random_spec(rng: &mut ChaCha8Rng, sizes: Vec<usize>) -> PlantedPartition {
    PlantedPartition {
        group_sizes: sizes,
        attr_dim: rng.random_range(2..8),
        p_in: rng.random_range(0.1..0.5),
        p_out: rng.random_range(0.0..0.2),
        attr_base: 0.1,
        attr_shift: rng.random_range(0.0..0.6),
    }
}

#[test]
fn binary_repair_aligns_equal_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..50 {
        let n = rng.random_range(2..=30);
        let g = planted_partition(&random_spec(&mut rng, vec![n, n]), trial).unwrap();
        let views = split_groups(&g).unwrap();
        let c = dyadic_cost(&views[0], &views[1], 0.5).unwrap();
        let plan = solve_exact(&c, uniform(n).view(), uniform(n).view()).unwrap();
        let (r0, r1) = repair_binary(&views[0], &views[1], &plan).unwrap();
        assert_eq!(sorted_rows(&r0), sorted_rows(&r1), "trial {trial}");
        assert!(w_sq(r0.view(), r1.view()) <= 1e-9);
    }
}

fn multiclass_rows(views: &[GroupView], seed: u64) -> Vec<Array2<f64>> {
    let rows: Vec<ArrayView2<'_, f64>> = views.iter().map(|v| v.rows.view()).collect();
    let n: usize = rows.iter().map(|r| r.nrows()).sum();
    let params = BarycenterParams {
        method: Method::exact(),
        ..Default::default()
    };
    let init = init_support_from_pool(&rows, n, seed).unwrap();
    let bary = free_support_barycenter(&rows, n, init, &params, &BlockSqEuclidean { split: views[0].attr_dim, first_weight: 0.5, second_weight: 0.5 }).unwrap();
    repair_multiclass(views, &bary).unwrap()
}

#[test]
fn multiclass_repair_shrinks_pairwise_distances() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut closer, mut total) = (0, 0);
    for trial in 0..20 {
        let k = rng.random_range(2..=4);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(5..=60 / k)).collect();
        let g = planted_partition(&random_spec(&mut rng, sizes), trial).unwrap();
        let views = split_groups(&g).unwrap();
        let repaired = multiclass_rows(&views, trial);
        for i in 0..k {
            for j in (i + 1)..k {
                total += 1;
                if w_sq(repaired[i].view(), repaired[j].view()) < w_sq(views[i].rows.view(), views[j].rows.view()) {
                    closer += 1;
                }
            }
        }
    }
    assert!(closer as f64 >= 0.95 * total as f64, "{closer}/{total}");
}

fn column_ranges(x: ArrayView2<'_, f64>) -> Vec<(f64, f64)> {
    x.axis_iter(Axis(1))
        .map(|c| c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))))
        .collect()
}

fn within(x: ArrayView2<'_, f64>, ranges: &[(f64, f64)]) -> bool {
    x.rows()
        .into_iter()
        .all(|r| r.iter().zip(ranges).all(|(&v, &(lo, hi))| v >= lo - 1e-12 && v <= hi + 1e-12))
}

#[test]
fn repaired_coordinates_stay_in_column_ranges() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..10 {
        let k = 2 + trial as usize % 2;
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(4..12)).collect();
        let g = planted_partition(&random_spec(&mut rng, sizes), trial).unwrap();
        let views = split_groups(&g).unwrap();
        let all: Vec<ArrayView2<'_, f64>> = views.iter().map(|v| v.rows.view()).collect();
        let ranges = column_ranges(ndarray::concatenate(Axis(0), &all).unwrap().view());
        let repaired = if k == 2 {
            let c = dyadic_cost(&views[0], &views[1], 0.5).unwrap();
            let plan = solve_exact(&c, uniform(views[0].len()).view(), uniform(views[1].len()).view()).unwrap();
            let (a, b) = repair_binary(&views[0], &views[1], &plan).unwrap();
            vec![a, b]
        } else {
            multiclass_rows(&views, trial)
        };
        for r in &repaired {
            assert!(within(r.view(), &ranges), "trial {trial}");
        }

        let out = repair_graph(&g, &RepairConfig { mode: RepairMode::Auto, ..Default::default() }).unwrap();
        assert!(within(out.graph.attributes(), &column_ranges(g.attributes())));
    }
}

#[test]
fn eta_extremes_ignore_the_unused_block() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let g = planted_partition(&random_spec(&mut rng, vec![6, 9]), 1).unwrap();
    let views = split_groups(&g).unwrap();
    let d = views[0].attr_dim;
    let perturb = |v: &GroupView, attributes: bool, rng: &mut ChaCha8Rng| {
        let mut out = v.clone();
        let cols = out.rows.ncols();
        for mut row in out.rows.rows_mut() {
            for c in 0..cols {
                if (c < d) == attributes {
                    row[c] += rng.random_range(-1.0..1.0);
                }
            }
        }
        out
    };
    for (eta, attributes) in [(1.0, false), (0.0, true)] {
        let base = dyadic_cost(&views[0], &views[1], eta).unwrap();
        let p0 = perturb(&views[0], attributes, &mut rng);
        let p1 = perturb(&views[1], attributes, &mut rng);
        let moved = dyadic_cost(&p0, &p1, eta).unwrap();
        assert_eq!(base.values(), moved.values(), "eta {eta}");
    }
}

fn random_distribution(rng: &mut ChaCha8Rng, k: usize) -> Array1<f64> {
    let w = Array1::from_shape_fn(k, |_| rng.random::<f64>());
    let s = w.sum();
    w / s
}

#[test]
fn aligned_marginals_give_identical_xor_joints() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100 {
        let k = rng.random_range(1..=5);
        let mu = random_distribution(&mut rng, k);
        let p0 = rng.random_range(0.05..0.95);
        let (same, cross) = xor_conditional_joints(mu.view(), mu.view(), p0).unwrap();
        let diff = (&same - &cross).mapv(f64::abs).fold(0.0f64, |m, &v| m.max(v));
        assert!(diff <= 1e-12, "{diff}");
    }
    for _ in 0..100 {
        let k = rng.random_range(2..=5);
        let mu0 = random_distribution(&mut rng, k);
        let mu1 = random_distribution(&mut rng, k);
        let p0 = rng.random_range(0.05..0.95);
        let (same, cross) = xor_conditional_joints(mu0.view(), mu1.view(), p0).unwrap();
        let diff = (&same - &cross).mapv(f64::abs).fold(0.0f64, |m, &v| m.max(v));
        assert!(diff > 1e-12);
    }
}

#[test]
fn dropout_count_is_binomial() {
    let spec = PlantedPartition {
        group_sizes: vec![60, 60],
        p_in: 0.4,
        p_out: 0.05,
        ..Default::default()
    };
    let g = planted_partition(&spec, 3).unwrap();
    let s = g.sensitive().to_vec();
    let intra = |g: &dyadicot::graph::Graph| g.edges().iter().filter(|e| s[e.u] == s[e.v]).count();
    let cross = |g: &dyadicot::graph::Graph| g.edges().iter().filter(|e| s[e.u] != s[e.v]).count();
    let m = intra(&g) as f64;
    for (seed, delta) in [(1u64, 0.2), (2, 0.5), (3, 0.8)] {
        let out = heterophily_dropout(&g, delta, seed).unwrap();
        assert_eq!(cross(&out), cross(&g));
        let kept = intra(&out) as f64;
        let half_width = 2.576 * (m * delta * (1.0 - delta)).sqrt();
        assert!((kept - m * (1.0 - delta)).abs() <= half_width, "delta {delta}: kept {kept} of {m}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn repaired_graph_is_well_formed(seed in any::<u64>(), k in 2usize..4, eta in 0.0f64..=1.0, threshold in proptest::option::of(0.05f64..=1.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(3..9)).collect();
        let g = planted_partition(&random_spec(&mut rng, sizes), seed).unwrap();
        let cfg = RepairConfig { eta, threshold, seed, ..Default::default() };
        let out = repair_graph(&g, &cfg).unwrap().graph;
        let a = out.adjacency();
        prop_assert!(out.is_symmetric());
        prop_assert!(a.diag().iter().all(|&v| v == 0.0));
        prop_assert!(a.iter().all(|&v| (0.0..=1.0).contains(&v)));
        if threshold.is_some() {
            prop_assert!(out.is_binary());
        }
        prop_assert_eq!(out.sensitive(), g.sensitive());
        prop_assert_eq!(out.node_ids(), g.node_ids());
    }
}
