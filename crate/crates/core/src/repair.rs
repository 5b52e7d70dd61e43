//! Optimal-transport repair of node attributes and adjacency rows.
//!
//! Each node is the row `[x_i | e_i]`. For two groups the rows of each group
//! are moved to the weighted midpoint between themselves and their barycentric
//! image in the other group. For more groups every group is pushed onto a
//! common free-support barycenter.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{split_groups, Graph, GroupView};
use crate::ot::{
    free_support_barycenter, init_support_from_pool, solve, uniform, BarycenterParams, BarycenterResult,
    BlockSqEuclidean, CostMatrix, Method, PointCost, SolveStatus, TransportPlan, PLAN_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RepairMode {
    Binary,
    Multiclass,
    /// Binary for two groups, multiclass otherwise.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    /// Weight of the attribute term in the ground cost; `1 − eta` weights the adjacency term.
    pub eta: f64,
    pub mode: RepairMode,
    pub method: Method,
    pub symmetrize: bool,
    /// Binarize repaired adjacency: entries `>= threshold` become 1, the rest 0.
    pub threshold: Option<f64>,
    /// Scale attribute columns to unit max magnitude before computing costs.
    pub normalize_attributes: bool,
    pub seed: u64,
    pub barycenter_iters: usize,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            eta: 0.5,
            mode: RepairMode::Auto,
            method: Method::default(),
            symmetrize: true,
            threshold: None,
            normalize_attributes: true,
            seed: 0,
            barycenter_iters: 10,
        }
    }
}

impl RepairConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!("eta must be in [0, 1], got {}", self.eta)));
        }
        if let Some(t) = self.threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidParameter(format!("threshold must be in (0, 1], got {t}")));
            }
        }
        if let Some(eps) = self.method.sinkhorn.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
            }
        }
        Ok(())
    }

    fn block_cost(&self, attr_dim: usize) -> BlockSqEuclidean {
        BlockSqEuclidean {
            split: attr_dim,
            first_weight: self.eta,
            second_weight: 1.0 - self.eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairMeta {
    pub eta: f64,
    /// Mode actually used.
    pub mode: RepairMode,
    /// One objective per plan: the single group-to-group plan in binary mode,
    /// one barycenter-to-group plan per group otherwise.
    pub plan_objectives: Vec<f64>,
    pub plan_status: Vec<SolveStatus>,
    pub barycenter_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RepairedGraph {
    pub graph: Graph,
    pub provenance: Vec<String>,
    pub meta: RepairMeta,
}

/// `C_ij = eta · ‖x_i − x_j‖² + (1 − eta) · ‖e_i − e_j‖²`.
pub fn dyadic_cost(g0: &GroupView, g1: &GroupView, eta: f64) -> Result<CostMatrix> {
    if g0.attr_dim != g1.attr_dim || g0.rows.ncols() != g1.rows.ncols() {
        return Err(Error::Dimension(format!(
            "group views differ in width: ({}, {}) vs ({}, {})",
            g0.attr_dim,
            g0.rows.ncols(),
            g1.attr_dim,
            g1.rows.ncols()
        )));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("eta must be in [0, 1], got {eta}")));
    }
    BlockSqEuclidean {
        split: g0.attr_dim,
        first_weight: eta,
        second_weight: 1.0 - eta,
    }
    .cost(g0.rows.view(), g1.rows.view())
}

fn check_plan(plan: &TransportPlan, m: usize, n: usize) -> Result<()> {
    if plan.values.dim() != (m, n) {
        return Err(Error::Dimension(format!(
            "plan is {:?} but groups have {m} and {n} rows",
            plan.values.dim()
        )));
    }
    let rows = plan.values.sum_axis(Axis(1));
    let cols = plan.values.sum_axis(Axis(0));
    let (a, b) = (1.0 / m as f64, 1.0 / n as f64);
    if rows.iter().any(|r| (r - a).abs() > PLAN_TOL) || cols.iter().any(|c| (c - b).abs() > PLAN_TOL) {
        return Err(Error::Infeasible("plan marginals do not match the group sizes".into()));
    }
    Ok(())
}

/// Geodesic midpoint repair of two groups:
/// `G̃0 = π0·G0 + π1·(N0 Γ) G1`, `G̃1 = π1·G1 + π0·(N1 Γᵀ) G0`, with `π_s = N_s / N`.
/// The row scaling is applied as an explicit row normalization of the plan.
pub fn repair_binary(g0: &GroupView, g1: &GroupView, plan: &TransportPlan) -> Result<(Array2<f64>, Array2<f64>)> {
    if g0.rows.ncols() != g1.rows.ncols() {
        return Err(Error::Dimension("group views differ in width".into()));
    }
    let (n0, n1) = (g0.len(), g1.len());
    check_plan(plan, n0, n1)?;
    let total = (n0 + n1) as f64;
    let (pi0, pi1) = (n0 as f64 / total, n1 as f64 / total);

    let to_1 = plan.row_normalized().dot(&g1.rows);
    let to_0 = plan.transposed().row_normalized().dot(&g0.rows);
    let mut r0 = &g0.rows * pi0;
    r0.scaled_add(pi1, &to_1);
    let mut r1 = &g1.rows * pi1;
    r1.scaled_add(pi0, &to_0);
    Ok((r0, r1))
}

/// Pushes every group onto the barycenter support: `G̃_k = (N_k Γ_kᵀ) Ḡ`.
pub fn repair_multiclass(groups: &[GroupView], bary: &BarycenterResult) -> Result<Vec<Array2<f64>>> {
    if groups.len() != bary.plans.len() {
        return Err(Error::Dimension(format!(
            "{} groups but {} barycenter plans",
            groups.len(),
            bary.plans.len()
        )));
    }
    let n = bary.support.nrows();
    groups
        .iter()
        .zip(&bary.plans)
        .map(|(g, plan)| {
            check_plan(plan, n, g.len())?;
            if bary.support.ncols() != g.rows.ncols() {
                return Err(Error::Dimension("barycenter support width differs from group rows".into()));
            }
            Ok(plan.transposed().row_normalized().dot(&bary.support))
        })
        .collect()
}

/// Writes repaired rows back into a graph.
///
/// `repaired[k]` holds the new rows of `views[k]`. The adjacency block is
/// optionally symmetrized and thresholded, then gets a zero diagonal and is
/// clipped to `[0, 1]`.
pub fn reassemble_graph(
    original: &Graph,
    views: &[GroupView],
    repaired: &[Array2<f64>],
    cfg: &RepairConfig,
) -> Result<Graph> {
    let n = original.n_nodes();
    let d = original.attr_dim();
    if views.len() != repaired.len() {
        return Err(Error::Dimension(format!(
            "{} group views but {} repaired blocks",
            views.len(),
            repaired.len()
        )));
    }
    let mut attributes = Array2::<f64>::zeros((n, d));
    let mut adjacency = Array2::<f64>::zeros((n, n));
    let mut seen = vec![false; n];
    for (view, rows) in views.iter().zip(repaired) {
        if rows.dim() != (view.member_index.len(), d + n) {
            return Err(Error::Dimension(format!(
                "repaired block for group {} is {:?}, expected ({}, {})",
                view.group_id,
                rows.dim(),
                view.member_index.len(),
                d + n
            )));
        }
        for (r, &node) in view.member_index.iter().enumerate() {
            if node >= n || seen[node] {
                return Err(Error::InvalidGraph(format!("node {node} repaired twice or out of range")));
            }
            seen[node] = true;
            attributes.row_mut(node).assign(&rows.slice(s![r, ..d]));
            adjacency.row_mut(node).assign(&rows.slice(s![r, d..]));
        }
    }
    if let Some(missing) = seen.iter().position(|&x| !x) {
        return Err(Error::InvalidGraph(format!("node {missing} missing from the repaired groups")));
    }

    if cfg.symmetrize {
        let t = adjacency.t().to_owned();
        adjacency = (&adjacency + &t) * 0.5;
    }
    if let Some(threshold) = cfg.threshold {
        adjacency.mapv_inplace(|w| if w >= threshold { 1.0 } else { 0.0 });
    }
    adjacency.diag_mut().fill(0.0);
    adjacency.mapv_inplace(|w| w.clamp(0.0, 1.0));
    original.with_features(attributes, adjacency)
}

/// Removes each edge whose endpoints share a sensitive value with
/// probability `delta`. Cross-group edges are kept.
pub fn heterophily_dropout(g: &Graph, delta: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("delta must be in [0, 1], got {delta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = g.sensitive();
    let dropped: Vec<(usize, usize)> = g
        .edges()
        .into_iter()
        .filter(|e| s[e.u] == s[e.v])
        .filter(|_| rng.random::<f64>() < delta)
        .map(|e| (e.u, e.v))
        .collect();
    g.without_pairs(&dropped)
}

/// Per-column scale bringing each attribute column to unit max magnitude.
fn column_scales(x: ArrayView2<'_, f64>) -> Array1<f64> {
    x.map_axis(Axis(0), |col| {
        let m = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m > 0.0 {
            m
        } else {
            1.0
        }
    })
}

/// Full repair: split by group, transport, and reassemble.
pub fn repair_graph(g: &Graph, cfg: &RepairConfig) -> Result<RepairedGraph> {
    cfg.validate()?;
    let n_groups = g.groups().len();
    let mode = match cfg.mode {
        RepairMode::Auto if n_groups == 2 => RepairMode::Binary,
        RepairMode::Auto => RepairMode::Multiclass,
        RepairMode::Binary if n_groups > 2 => {
            return Err(Error::InvalidParameter(format!(
                "binary repair needs exactly two groups, found {n_groups}"
            )))
        }
        m => m,
    };

    let scales = column_scales(g.attributes());
    let work = if cfg.normalize_attributes {
        let scaled = &g.attributes() / &scales;
        g.with_features(scaled, g.adjacency().to_owned())?
    } else {
        g.clone()
    };
    let views = split_groups(&work)?;
    let cost = cfg.block_cost(g.attr_dim());

    let (mut repaired, plan_objectives, plan_status, barycenter_history) = match mode {
        RepairMode::Binary => {
            let c = dyadic_cost(&views[0], &views[1], cfg.eta)?;
            let plan = solve(&c, uniform(views[0].len()).view(), uniform(views[1].len()).view(), &cfg.method)?;
            log::info!("binary repair plan objective {:.6}", plan.objective);
            let (r0, r1) = repair_binary(&views[0], &views[1], &plan)?;
            (vec![r0, r1], vec![plan.objective], vec![plan.status], Vec::new())
        }
        _ => {
            let rows: Vec<ArrayView2<'_, f64>> = views.iter().map(|v| v.rows.view()).collect();
            let n = g.n_nodes();
            let init = init_support_from_pool(&rows, n, cfg.seed)?;
            let params = BarycenterParams {
                max_iter: cfg.barycenter_iters,
                method: cfg.method,
                ..Default::default()
            };
            let bary = free_support_barycenter(&rows, n, init, &params, &cost)?;
            log::info!(
                "barycenter objective {:.6} after {} iterations",
                bary.objective(),
                bary.iterations()
            );
            let repaired = repair_multiclass(&views, &bary)?;
            let objectives = bary.plans.iter().map(|p| p.objective).collect();
            let status = bary.plans.iter().map(|p| p.status).collect();
            (repaired, objectives, status, bary.objective_history)
        }
    };

    if cfg.normalize_attributes {
        let d = g.attr_dim();
        for block in &mut repaired {
            let mut attrs = block.slice_mut(s![.., ..d]);
            attrs *= &scales;
        }
    }
    let graph = reassemble_graph(g, &views, &repaired, cfg)?;
    Ok(RepairedGraph {
        graph,
        provenance: g.node_ids().to_vec(),
        meta: RepairMeta {
            eta: cfg.eta,
            mode,
            plan_objectives,
            plan_status,
            barycenter_history,
        },
    })
}
