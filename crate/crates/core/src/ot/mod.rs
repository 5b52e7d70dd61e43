//! Discrete optimal transport: cost matrices, an exact network-simplex
//! solver, log-domain Sinkhorn and free-support barycenters.

pub mod barycenter;
pub mod cost;
mod network_simplex;
pub mod sinkhorn;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use barycenter::{free_support_barycenter, init_support_from_pool, BarycenterParams, BarycenterResult};
pub use cost::{cost_hamming, cost_sqeuclidean, BlockSqEuclidean, PointCost, SqEuclidean};
pub use sinkhorn::{sinkhorn, SinkhornParams};

/// Tolerance on marginal mass and on plan feasibility.
pub const MARGINAL_TOL: f64 = 1e-10;
pub const PLAN_TOL: f64 = 1e-8;

/// Non-negative, finite `m × n` ground-cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(Array2<f64>);

impl CostMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cost entries must be finite and non-negative, found {bad}"
            )));
        }
        Ok(CostMatrix(values))
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn median(&self) -> f64 {
        let mut v: Vec<f64> = self.0.iter().copied().collect();
        let len = v.len();
        if len == 0 {
            return 0.0;
        }
        let (lo, hi, _) = v.select_nth_unstable_by(len / 2, f64::total_cmp);
        let hi = *hi;
        if len % 2 == 1 {
            hi
        } else {
            let max_lo = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (max_lo + hi) / 2.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Converged { iterations: usize },
    MaxIterReached { iterations: usize, violation: f64 },
}

impl SolveStatus {
    pub fn is_converged(&self) -> bool {
        !matches!(self, SolveStatus::MaxIterReached { .. })
    }
}

/// Coupling with prescribed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub values: Array2<f64>,
    pub row_marginal: Array1<f64>,
    pub col_marginal: Array1<f64>,
    pub objective: f64,
    pub status: SolveStatus,
}

impl TransportPlan {
    pub(crate) fn from_values(values: Array2<f64>, cost: &CostMatrix, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, status: SolveStatus) -> Self {
        let objective = values
            .iter()
            .zip(cost.values().iter())
            .map(|(p, c)| p * c)
            .sum();
        TransportPlan {
            values,
            row_marginal: a.to_owned(),
            col_marginal: b.to_owned(),
            objective,
            status,
        }
    }

    /// Largest absolute deviation of a row or column sum from its marginal.
    pub fn marginal_violation(&self) -> f64 {
        let rows = self.values.sum_axis(Axis(1));
        let cols = self.values.sum_axis(Axis(0));
        let r = (&rows - &self.row_marginal).mapv(f64::abs).fold(0.0, |m: f64, &x| m.max(x));
        let c = (&cols - &self.col_marginal).mapv(f64::abs).fold(0.0, |m: f64, &x| m.max(x));
        r.max(c)
    }

    /// Rows rescaled to sum to one (barycentric projection weights). Rows
    /// without mass stay zero.
    pub fn row_normalized(&self) -> Array2<f64> {
        let mut out = self.values.clone();
        for mut row in out.rows_mut() {
            let s: f64 = row.sum();
            if s > 0.0 {
                row.mapv_inplace(|x| x / s);
            }
        }
        out
    }

    pub fn transposed(&self) -> TransportPlan {
        TransportPlan {
            values: self.values.t().to_owned(),
            row_marginal: self.col_marginal.clone(),
            col_marginal: self.row_marginal.clone(),
            objective: self.objective,
            status: self.status,
        }
    }
}

/// Which solver computes a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exact,
    Entropic,
    /// Exact when both sides have at most [`AUTO_EXACT_LIMIT`] points.
    #[default]
    Auto,
}

pub const AUTO_EXACT_LIMIT: usize = 1500;

impl SolverKind {
    pub fn resolve(self, m: usize, n: usize) -> SolverKind {
        match self {
            SolverKind::Auto if m <= AUTO_EXACT_LIMIT && n <= AUTO_EXACT_LIMIT => SolverKind::Exact,
            SolverKind::Auto => SolverKind::Entropic,
            other => other,
        }
    }
}

/// Solver choice plus the entropic settings used when it resolves to Sinkhorn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Method {
    pub kind: SolverKind,
    pub sinkhorn: SinkhornParams,
}

impl Method {
    pub fn exact() -> Self {
        Method {
            kind: SolverKind::Exact,
            sinkhorn: SinkhornParams::default(),
        }
    }

    pub fn entropic(params: SinkhornParams) -> Self {
        Method {
            kind: SolverKind::Entropic,
            sinkhorn: params,
        }
    }
}

pub(crate) fn check_marginals(cost: &CostMatrix, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<()> {
    let (m, n) = cost.dim();
    if a.len() != m || b.len() != n {
        return Err(Error::Dimension(format!(
            "cost is {m}×{n} but marginals have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if m == 0 || n == 0 {
        return Err(Error::Infeasible("empty marginal".into()));
    }
    for (name, w) in [("row", a), ("column", b)] {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Infeasible(format!("{name} marginal has a negative or non-finite entry")));
        }
        let total: f64 = w.sum();
        if (total - 1.0).abs() > MARGINAL_TOL {
            return Err(Error::Infeasible(format!("{name} marginal sums to {total}, expected 1")));
        }
    }
    Ok(())
}

fn is_uniform(w: ArrayView1<'_, f64>) -> bool {
    let first = w[0];
    w.iter().all(|&x| x == first)
}

/// Exact optimal plan by network simplex.
///
/// Uniform marginals are solved on integer supplies (`n` per row, `m` per
/// column) so the returned flows are exact multiples of `1 / (m n)`.
pub fn solve_exact(cost: &CostMatrix, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<TransportPlan> {
    check_marginals(cost, a, b)?;
    let (m, n) = cost.dim();
    let values = if is_uniform(a) && is_uniform(b) {
        let sol = network_simplex::solve(cost.values(), &vec![n as f64; m], &vec![m as f64; n])?;
        let scale = (m * n) as f64;
        sol.flows.mapv(|f| f / scale)
    } else {
        network_simplex::solve(cost.values(), a.as_slice().unwrap_or(&a.to_vec()), b.as_slice().unwrap_or(&b.to_vec()))?.flows
    };
    Ok(TransportPlan::from_values(values, cost, a, b, SolveStatus::Optimal))
}

/// Solves with the requested method.
pub fn solve(cost: &CostMatrix, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, method: &Method) -> Result<TransportPlan> {
    let (m, n) = cost.dim();
    match method.kind.resolve(m, n) {
        SolverKind::Entropic => sinkhorn(cost, a, b, &method.sinkhorn),
        _ => solve_exact(cost, a, b),
    }
}

/// Transport cost of the optimal (or entropic) plan.
pub fn wasserstein(cost: &CostMatrix, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, method: &Method) -> Result<f64> {
    Ok(solve(cost, a, b, method)?.objective)
}

/// Uniform probability vector of length `n`.
pub fn uniform(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cm(v: Array2<f64>) -> CostMatrix {
        CostMatrix::new(v).unwrap()
    }

    #[test]
    fn zero_cost_matching() {
        let plan = solve_exact(&cm(array![[0.0, 1.0], [1.0, 0.0]]), uniform(2).view(), uniform(2).view()).unwrap();
        assert_eq!(plan.values, array![[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(plan.objective, 0.0);
    }

    #[test]
    fn two_by_two_enumerated() {
        // identity plan costs ½(1+1)=1, swap costs ½(2+3)=2.5
        let plan = solve_exact(&cm(array![[1.0, 2.0], [3.0, 1.0]]), uniform(2).view(), uniform(2).view()).unwrap();
        assert_eq!(plan.values, array![[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(plan.objective, 1.0);
    }

    #[test]
    fn single_point() {
        let plan = solve_exact(&cm(array![[4.25]]), array![1.0].view(), array![1.0].view()).unwrap();
        assert_eq!(plan.values, array![[1.0]]);
        assert_eq!(plan.objective, 4.25);
    }

    #[test]
    fn mismatched_mass_is_infeasible() {
        let err = solve_exact(&cm(array![[1.0, 2.0]]), array![1.0].view(), array![0.5, 0.4].view());
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }

    #[test]
    fn non_uniform_marginals() {
        let c = cost_hamming(&[0, 1], &[0, 1]);
        let a = array![0.7, 0.3];
        let b = array![0.4, 0.6];
        let w = wasserstein(&c, a.view(), b.view(), &Method::exact()).unwrap();
        assert!((w - 0.3).abs() < 1e-15);
        let plan = solve_exact(&c, a.view(), b.view()).unwrap();
        assert!(plan.marginal_violation() < PLAN_TOL);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(cm(array![[3.0, 1.0, 2.0]]).median(), 2.0);
        assert_eq!(cm(array![[4.0, 1.0], [3.0, 2.0]]).median(), 2.5);
    }

    #[test]
    fn auto_switches_on_size() {
        assert_eq!(SolverKind::Auto.resolve(10, 1500), SolverKind::Exact);
        assert_eq!(SolverKind::Auto.resolve(10, 1501), SolverKind::Entropic);
    }

    #[test]
    fn row_normalization_is_exact_for_permutations() {
        let plan = solve_exact(
            &cm(array![[5.0, 0.0, 9.0], [0.0, 7.0, 9.0], [9.0, 9.0, 0.0]]),
            uniform(3).view(),
            uniform(3).view(),
        )
        .unwrap();
        assert_eq!(plan.row_normalized(), array![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
    }
}
