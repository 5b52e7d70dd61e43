//! Primal network simplex for the uncapacitated transportation problem.
//!
//! The spanning-tree bookkeeping (thread / reverse-thread lists, successor
//! counts, last successors) and the block-search pivot rule follow the LEMON
//! `NetworkSimplex` design. Sources are nodes `0..m`, sinks `m..m+n`, and an
//! artificial root carries the starting basis.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;
const PRICING_EPS: f64 = 1e-14;

pub(crate) struct Solution {
    /// Flow on each source/sink arc, `m × n`.
    pub flows: Array2<f64>,
    /// Node potentials; every arc satisfies `c_ij + pi_i - pi_{m+j} >= 0` at optimum.
    #[allow(dead_code)]
    pub potentials: Vec<f64>,
}

struct Simplex {
    node_num: usize,
    arc_num: usize,

    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    state: Vec<i8>,
    pi: Vec<f64>,

    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,

    block_size: usize,
    next_arc: usize,
}

impl Simplex {
    fn new(cost: ArrayView2<'_, f64>, supply: &[f64], demand: &[f64]) -> Self {
        let (m, n) = cost.dim();
        let node_num = m + n;
        let arc_num = m * n;
        let all_arc_num = arc_num + node_num;
        let root = node_num;

        let mut source = Vec::with_capacity(all_arc_num);
        let mut target = Vec::with_capacity(all_arc_num);
        let mut costs = Vec::with_capacity(all_arc_num);
        let mut max_cost = 0.0f64;
        for i in 0..m {
            for j in 0..n {
                source.push(i);
                target.push(m + j);
                let c = cost[[i, j]];
                max_cost = max_cost.max(c.abs());
                costs.push(c);
            }
        }
        source.resize(all_arc_num, 0);
        target.resize(all_arc_num, 0);
        costs.resize(all_arc_num, 0.0);

        let mut s = Simplex {
            node_num,
            arc_num,
            source,
            target,
            cost: costs,
            flow: vec![0.0; all_arc_num],
            state: vec![STATE_LOWER; all_arc_num],
            pi: vec![0.0; node_num + 1],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            pred_dir: vec![DIR_UP; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![0; node_num + 1],
            last_succ: vec![0; node_num + 1],
            dirty_revs: Vec::new(),
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
            block_size: ((arc_num as f64).sqrt() as usize).max(10),
            next_arc: 0,
        };

        let art_cost = (max_cost + 1.0) * node_num as f64;
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;

        let node_supply = supply.iter().copied().chain(demand.iter().map(|&d| -d));
        for (u, sup) in node_supply.enumerate() {
            let e = arc_num + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = STATE_TREE;
            if sup >= 0.0 {
                s.pred_dir[u] = DIR_UP;
                s.pi[u] = 0.0;
                s.source[e] = u;
                s.target[e] = root;
                s.flow[e] = sup;
                s.cost[e] = 0.0;
            } else {
                s.pred_dir[u] = DIR_DOWN;
                s.pi[u] = art_cost;
                s.source[e] = root;
                s.target[e] = u;
                s.flow[e] = -sup;
                s.cost[e] = art_cost;
            }
        }
        s
    }

    #[inline]
    fn reduced_cost(&self, e: usize) -> f64 {
        self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]]
    }

    #[inline]
    fn violation(&self, e: usize) -> f64 {
        let c = self.state[e] as f64 * self.reduced_cost(e);
        let tol = PRICING_EPS
            * (self.cost[e].abs() + self.pi[self.source[e]].abs() + self.pi[self.target[e]].abs());
        if c < -tol {
            c
        } else {
            0.0
        }
    }

    /// Block search: scan blocks of arcs cyclically and take the most violating
    /// arc of the first block that contains one.
    fn find_entering_arc(&mut self) -> bool {
        let mut min = 0.0;
        let mut cnt = self.block_size;
        let start = self.next_arc;
        let order = (start..self.arc_num).chain(0..start);
        for e in order {
            let c = self.violation(e);
            if c < min {
                min = c;
                self.in_arc = e;
            }
            cnt -= 1;
            if cnt == 0 {
                if min < 0.0 {
                    self.next_arc = if e + 1 == self.arc_num { 0 } else { e + 1 };
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if min < 0.0 {
            self.next_arc = 0;
            return true;
        }
        false
    }

    fn find_join_node(&mut self) {
        let mut u = self.source[self.in_arc];
        let mut v = self.target[self.in_arc];
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Picks the blocking arc on the cycle closed by the entering arc. Ties on
    /// the second path are broken toward the last candidate, which keeps the
    /// tree strongly feasible and rules out cycling.
    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = if self.state[self.in_arc] == STATE_LOWER {
            (self.source[self.in_arc], self.target[self.in_arc])
        } else {
            (self.target[self.in_arc], self.source[self.in_arc])
        };
        self.delta = f64::INFINITY;
        let mut result = 0;

        let mut u = first;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_DOWN {
                f64::INFINITY
            } else {
                self.flow[e]
            };
            if d < self.delta {
                self.delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_UP {
                f64::INFINITY
            } else {
                self.flow[e]
            };
            if d <= self.delta {
                self.delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }

        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self, change: bool) {
        if self.delta > 0.0 {
            let val = self.state[self.in_arc] as f64 * self.delta;
            self.flow[self.in_arc] += val;
            let mut u = self.source[self.in_arc];
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
            let mut u = self.target[self.in_arc];
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
        }
        if change {
            self.state[self.in_arc] = STATE_TREE;
            let out = self.pred[self.u_out];
            self.state[out] = STATE_LOWER;
        } else {
            self.state[self.in_arc] = -self.state[self.in_arc];
        }
    }

    fn update_tree_structure(&mut self) {
        let old_rev_thread = self.rev_thread[self.u_out];
        let old_succ_num = self.succ_num[self.u_out];
        let old_last_succ = self.last_succ[self.u_out];
        let v_out = self.parent[self.u_out];
        let (u_in, v_in, u_out) = (self.u_in, self.v_in, self.u_out);

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source[self.in_arc] {
                DIR_UP
            } else {
                DIR_DOWN
            };

            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // Re-hang the stem between u_in and u_out under its new parents.
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // Reverse pred arcs and recount successors along the stem.
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source[self.in_arc] {
                DIR_UP
            } else {
                DIR_DOWN
            };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[self.join] == v_in {
            self.join
        } else {
            NONE
        };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if self.join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != self.join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != self.join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let sigma = self.pi[self.v_in]
            - self.pi[self.u_in]
            - self.pred_dir[self.u_in] as f64 * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(&mut self) {
        while self.find_entering_arc() {
            self.find_join_node();
            let change = self.find_leaving_arc();
            self.change_flow(change);
            if change {
                self.update_tree_structure();
                self.update_potential();
            }
        }
    }
}

/// Minimum-cost flow from `supply` (rows) to `demand` (columns) over a
/// complete bipartite network with arc costs `cost`.
pub(crate) fn solve(cost: ArrayView2<'_, f64>, supply: &[f64], demand: &[f64]) -> Result<Solution> {
    let (m, n) = cost.dim();
    debug_assert_eq!(supply.len(), m);
    debug_assert_eq!(demand.len(), n);
    let mut simplex = Simplex::new(cost, supply, demand);
    simplex.run();

    let total: f64 = supply.iter().sum();
    let feasibility_tol = 1e-9 * total.max(1.0);
    let stranded: f64 = simplex.flow[simplex.arc_num..].iter().sum();
    if stranded > feasibility_tol {
        return Err(Error::Infeasible(format!(
            "{stranded:e} units of mass could not be routed"
        )));
    }

    let flows = Array2::from_shape_vec((m, n), simplex.flow[..simplex.arc_num].to_vec())
        .expect("arc count is m * n");
    let potentials = simplex.pi[..simplex.node_num].to_vec();
    Ok(Solution { flows, potentials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_by_two_prefers_diagonal() {
        let c = array![[1.0, 2.0], [3.0, 1.0]];
        let sol = solve(c.view(), &[2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert_eq!(sol.flows, array![[2.0, 0.0], [0.0, 2.0]]);
    }

    #[test]
    fn unbalanced_sizes_route_all_mass() {
        let c = array![[0.0, 4.0, 1.0], [2.0, 0.0, 5.0]];
        // supplies 3 each, demands 2 each
        let sol = solve(c.view(), &[3.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        let rows = sol.flows.sum_axis(ndarray::Axis(1));
        let cols = sol.flows.sum_axis(ndarray::Axis(0));
        assert_eq!(rows.to_vec(), vec![3.0, 3.0]);
        assert_eq!(cols.to_vec(), vec![2.0, 2.0, 2.0]);
        let objective: f64 = (&sol.flows * &c).sum();
        // 1→1 (2 units), 1→0 (1 unit, cost 2), 0→0 (1), 0→2 (2 units, cost 2)
        assert_eq!(objective, 4.0);
    }

    #[test]
    fn potentials_certify_optimality() {
        let c = array![[3.0, 1.0, 7.0], [2.0, 6.0, 5.0], [4.0, 4.0, 0.5]];
        let sol = solve(c.view(), &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let rc = c[[i, j]] + sol.potentials[i] - sol.potentials[3 + j];
                assert!(rc > -1e-9, "negative reduced cost at ({i},{j})");
                if sol.flows[[i, j]] > 0.0 {
                    assert!(rc.abs() < 1e-9, "complementary slackness at ({i},{j})");
                }
            }
        }
    }
}
