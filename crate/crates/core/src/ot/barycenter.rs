//! Free-support Wasserstein barycenter with uniform weights over the input
//! distributions and a fixed number of uniformly weighted support points.
//!
//! Alternates two steps until the objective stalls:
//! 1. for the current support, solve one transport plan per distribution;
//! 2. for the current plans, move every support point to its plan-weighted
//!    mean, `X ← N · Σ_k λ_k Γ_k G_k`, which minimizes any weighted squared
//!    Euclidean cost for fixed plans.
//!
//! A step that would raise the objective (possible with entropic plans) is
//! discarded and the iteration stops, so the recorded history never increases.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{solve, uniform, Method, PointCost, TransportPlan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarycenterParams {
    pub max_iter: usize,
    /// Stop when one round improves the objective by less than this.
    pub tol: f64,
    pub method: Method,
}

impl Default for BarycenterParams {
    fn default() -> Self {
        BarycenterParams {
            max_iter: 10,
            tol: 1e-9,
            method: Method::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub support: Array2<f64>,
    /// `plans[k]` couples the support (rows) with group `k` (columns).
    pub plans: Vec<TransportPlan>,
    pub objective_history: Vec<f64>,
}

impl BarycenterResult {
    pub fn objective(&self) -> f64 {
        *self.objective_history.last().expect("history starts non-empty")
    }

    pub fn iterations(&self) -> usize {
        self.objective_history.len() - 1
    }
}

/// Draws `n` rows from the pooled groups, without replacement when the pool
/// is large enough.
pub fn init_support_from_pool(groups: &[ArrayView2<'_, f64>], n: usize, seed: u64) -> Result<Array2<f64>> {
    let views: Vec<ArrayView2<'_, f64>> = groups.to_vec();
    let pool = ndarray::concatenate(Axis(0), &views)
        .map_err(|e| Error::Dimension(format!("groups have different point dimensions: {e}")))?;
    if pool.nrows() == 0 {
        return Err(Error::InvalidParameter("cannot initialize from empty groups".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = if n <= pool.nrows() {
        rand::seq::index::sample(&mut rng, pool.nrows(), n).into_vec()
    } else {
        use rand::Rng;
        (0..n).map(|_| rng.random_range(0..pool.nrows())).collect()
    };
    Ok(pool.select(Axis(0), &picks))
}

fn plans_for<C: PointCost>(
    support: ArrayView2<'_, f64>,
    groups: &[ArrayView2<'_, f64>],
    cost: &C,
    method: &Method,
) -> Result<(Vec<TransportPlan>, f64)> {
    let lambda = 1.0 / groups.len() as f64;
    let weights = uniform(support.nrows());
    let mut plans = Vec::with_capacity(groups.len());
    let mut objective = 0.0;
    for g in groups {
        let c = cost.cost(support, *g)?;
        let plan = solve(&c, weights.view(), uniform(g.nrows()).view(), method)?;
        objective += lambda * plan.objective;
        plans.push(plan);
    }
    Ok((plans, objective))
}

fn barycentric_update(plans: &[TransportPlan], groups: &[ArrayView2<'_, f64>], n: usize) -> Array2<f64> {
    let scale = n as f64 / groups.len() as f64;
    let mut support = Array2::zeros((n, groups[0].ncols()));
    for (plan, g) in plans.iter().zip(groups) {
        support.scaled_add(scale, &plan.values.dot(g));
    }
    support
}

pub fn free_support_barycenter<C: PointCost>(
    groups: &[ArrayView2<'_, f64>],
    support_size: usize,
    init: Array2<f64>,
    params: &BarycenterParams,
    cost: &C,
) -> Result<BarycenterResult> {
    if groups.is_empty() {
        return Err(Error::InvalidParameter("barycenter of zero distributions".into()));
    }
    if support_size == 0 {
        return Err(Error::InvalidParameter("support size must be positive".into()));
    }
    let dim = groups[0].ncols();
    for (k, g) in groups.iter().enumerate() {
        if g.nrows() == 0 {
            return Err(Error::InvalidParameter(format!("group {k} is empty")));
        }
        if g.ncols() != dim {
            return Err(Error::Dimension(format!(
                "group {k} has dimension {}, expected {dim}",
                g.ncols()
            )));
        }
    }
    if init.dim() != (support_size, dim) {
        return Err(Error::Dimension(format!(
            "initial support is {:?}, expected ({support_size}, {dim})",
            init.dim()
        )));
    }

    let mut support = init;
    let (mut plans, mut objective) = plans_for(support.view(), groups, cost, &params.method)?;
    let mut history = vec![objective];
    for iter in 0..params.max_iter {
        let candidate = barycentric_update(&plans, groups, support_size);
        let (next_plans, next_objective) = plans_for(candidate.view(), groups, cost, &params.method)?;
        log::debug!("barycenter iteration {}: objective {next_objective}", iter + 1);
        if next_objective > objective {
            break;
        }
        support = candidate;
        plans = next_plans;
        history.push(next_objective);
        let improvement = objective - next_objective;
        objective = next_objective;
        if improvement < params.tol {
            break;
        }
    }
    Ok(BarycenterResult {
        support,
        plans,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::SqEuclidean;
    use ndarray::array;

    fn exact(max_iter: usize) -> BarycenterParams {
        BarycenterParams {
            max_iter,
            tol: 1e-9,
            method: Method::exact(),
        }
    }

    #[test]
    fn single_group_is_its_own_barycenter() {
        let g = array![[0.0, 1.0], [2.0, -1.0], [5.0, 5.0]];
        let init = init_support_from_pool(&[g.view()], 3, 4).unwrap();
        let res = free_support_barycenter(&[g.view()], 3, init, &exact(20), &SqEuclidean).unwrap();
        assert!(res.objective() < 1e-12);
    }

    #[test]
    fn two_points_meet_in_the_middle() {
        let g0 = array![[0.0]];
        let g1 = array![[2.0]];
        let res = free_support_barycenter(&[g0.view(), g1.view()], 1, array![[7.0]], &exact(10), &SqEuclidean).unwrap();
        assert_eq!(res.support, array![[1.0]]);
        assert_eq!(res.objective(), 1.0);
    }

    #[test]
    fn plans_have_barycenter_rows() {
        let g0 = array![[0.0], [0.0]];
        let g1 = array![[2.0], [4.0]];
        let init = init_support_from_pool(&[g0.view(), g1.view()], 2, 0).unwrap();
        let res = free_support_barycenter(&[g0.view(), g1.view()], 2, init, &exact(10), &SqEuclidean).unwrap();
        assert_eq!(res.plans.len(), 2);
        for p in &res.plans {
            assert_eq!(p.values.dim(), (2, 2));
        }
        let mut pts: Vec<f64> = res.support.iter().copied().collect();
        pts.sort_by(f64::total_cmp);
        assert_eq!(pts, vec![1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = array![[0.0]];
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(free_support_barycenter(&[g.view(), empty.view()], 1, array![[0.0]], &exact(1), &SqEuclidean).is_err());
        assert!(free_support_barycenter(&[g.view()], 0, Array2::zeros((0, 1)), &exact(1), &SqEuclidean).is_err());
    }
}
