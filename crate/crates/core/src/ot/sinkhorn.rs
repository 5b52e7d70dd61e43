//! Entropic optimal transport by log-domain Sinkhorn iterations.
//!
//! Potentials are updated with log-sum-exp reductions, so no kernel entry is
//! ever formed outside the log domain and small regularizations stay finite.
//! The regularization is annealed from the cost scale down to the target value
//! with warm-started potentials, and the final scaled plan is rounded onto the
//! feasible set so both marginals hold to machine precision.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_marginals, CostMatrix, SolveStatus, TransportPlan};
use crate::error::{Error, Result};

/// Default regularization relative to the median cost.
pub const DEFAULT_EPSILON_FACTOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornParams {
    /// Absolute regularization strength; `None` means `0.05 · median(C)`.
    pub epsilon: Option<f64>,
    pub max_iter: usize,
    /// Stop once the L1 row-marginal violation drops below this.
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        SinkhornParams {
            epsilon: None,
            max_iter: 10_000,
            tol: 1e-7,
        }
    }
}

impl SinkhornParams {
    pub fn with_epsilon(epsilon: f64) -> Self {
        SinkhornParams {
            epsilon: Some(epsilon),
            ..Default::default()
        }
    }

    pub fn resolve_epsilon(&self, cost: &CostMatrix) -> f64 {
        self.epsilon.unwrap_or_else(|| default_epsilon(cost))
    }
}

/// `0.05 · median(C)`, falling back to the mean and then to 1 for costs that
/// are mostly or entirely zero.
pub fn default_epsilon(cost: &CostMatrix) -> f64 {
    let median = cost.median();
    if median > 0.0 {
        return DEFAULT_EPSILON_FACTOR * median;
    }
    let mean = cost.values().mean().unwrap_or(0.0);
    if mean > 0.0 {
        DEFAULT_EPSILON_FACTOR * mean
    } else {
        1.0
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

struct State<'a> {
    cost: &'a Array2<f64>,
    cost_t: Array2<f64>,
    log_a: Array1<f64>,
    log_b: Array1<f64>,
    a: ArrayView1<'a, f64>,
    f: Array1<f64>,
    g: Array1<f64>,
}

impl State<'_> {
    /// `LSE_j((g_j − C_ij)/ε)` for every row.
    fn row_lse(&self, eps: f64) -> Vec<f64> {
        let g = &self.g;
        (0..self.cost.nrows())
            .into_par_iter()
            .map(|i| {
                let row = self.cost.row(i);
                log_sum_exp(row.iter().zip(g.iter()).map(move |(c, gj)| (gj - c) / eps))
            })
            .collect()
    }

    fn col_lse(&self, eps: f64) -> Vec<f64> {
        let f = &self.f;
        (0..self.cost_t.nrows())
            .into_par_iter()
            .map(|j| {
                let col = self.cost_t.row(j);
                log_sum_exp(col.iter().zip(f.iter()).map(move |(c, fi)| (fi - c) / eps))
            })
            .collect()
    }

    /// Runs until the row violation is below `tol` or `max_iter` updates.
    /// Returns (iterations, final violation).
    fn iterate(&mut self, eps: f64, max_iter: usize, tol: f64) -> (usize, f64) {
        let mut iterations = 0;
        loop {
            let lse = self.row_lse(eps);
            let violation: f64 = lse
                .iter()
                .zip(self.f.iter())
                .zip(self.a.iter())
                .map(|((l, fi), ai)| ((fi / eps + l).exp() - ai).abs())
                .sum();
            if violation < tol || iterations >= max_iter {
                return (iterations, violation);
            }
            for (i, l) in lse.iter().enumerate() {
                self.f[i] = eps * (self.log_a[i] - l);
            }
            let lse = self.col_lse(eps);
            for (j, l) in lse.iter().enumerate() {
                self.g[j] = eps * (self.log_b[j] - l);
            }
            iterations += 1;
        }
    }

    fn plan(&self, eps: f64) -> Array2<f64> {
        let mut p = self.cost.clone();
        for ((i, j), x) in p.indexed_iter_mut() {
            *x = ((self.f[i] + self.g[j] - *x) / eps).exp();
        }
        p
    }
}

/// Projects a positive matrix onto the coupling polytope with marginals
/// `(a, b)`: shrink over-full rows, then columns, then spread the deficit as a
/// rank-one correction.
pub(crate) fn round_to_feasible(p: &mut Array2<f64>, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) {
    for (i, mut row) in p.axis_iter_mut(Axis(0)).enumerate() {
        let s = row.sum();
        if s > a[i] && s > 0.0 {
            let k = a[i] / s;
            row.mapv_inplace(|x| x * k);
        }
    }
    for (j, mut col) in p.axis_iter_mut(Axis(1)).enumerate() {
        let s = col.sum();
        if s > b[j] && s > 0.0 {
            let k = b[j] / s;
            col.mapv_inplace(|x| x * k);
        }
    }
    let err_r: Array1<f64> = (&a - &p.sum_axis(Axis(1))).mapv(|x| x.max(0.0));
    let err_c: Array1<f64> = (&b - &p.sum_axis(Axis(0))).mapv(|x| x.max(0.0));
    let total = err_r.sum();
    if total > 0.0 {
        for ((i, j), x) in p.indexed_iter_mut() {
            *x += err_r[i] * err_c[j] / total;
        }
    }
}

/// Entropic-regularized plan for cost `C` between `a` and `b`.
///
/// The returned plan always satisfies the marginals; when the iteration budget
/// runs out first, `status` is [`SolveStatus::MaxIterReached`] with the
/// violation measured before rounding.
pub fn sinkhorn(
    cost: &CostMatrix,
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    params: &SinkhornParams,
) -> Result<TransportPlan> {
    check_marginals(cost, a, b)?;
    let eps = params.resolve_epsilon(cost);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
    }
    let values = cost.values().to_owned();
    let max_cost = values.iter().copied().fold(0.0, f64::max);
    let mut state = State {
        cost_t: values.t().as_standard_layout().into_owned(),
        cost: &values,
        log_a: a.mapv(f64::ln),
        log_b: b.mapv(f64::ln),
        a,
        f: Array1::zeros(a.len()),
        g: Array1::zeros(b.len()),
    };

    let mut stage_eps = max_cost.max(eps);
    while stage_eps > eps {
        state.iterate(stage_eps, 200, 1e-3);
        stage_eps = (stage_eps / 4.0).max(eps);
    }
    let (iterations, violation) = state.iterate(eps, params.max_iter, params.tol);
    let status = if violation < params.tol {
        SolveStatus::Converged { iterations }
    } else {
        log::warn!("sinkhorn stopped after {iterations} iterations with marginal violation {violation:e}");
        SolveStatus::MaxIterReached { iterations, violation }
    };

    let mut plan = state.plan(eps);
    round_to_feasible(&mut plan, a, b);
    Ok(TransportPlan::from_values(plan, cost, a, b, status))
}
