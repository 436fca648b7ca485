//! Exact solver for the discrete transportation problem.
//!
//! Primal network simplex on the bipartite supply/demand graph with a
//! strongly feasible spanning tree (threaded-tree representation) and
//! block-search pivoting. Flows and costs are `f64`; everything is
//! single-threaded and deterministic.

use crate::error::{Error, Result};

const STATE_UPPER: i8 = -1;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

/// Solution of a transportation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// Minimal total cost `Σ_ij c_ij f_ij`.
    pub cost: f64,
    /// Nonzero flows `(i, j, amount)`.
    pub flows: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

struct Simplex<'a> {
    supply_count: usize,
    demand_count: usize,
    arc_num: usize,
    cost: &'a [f64],
    art_cost: f64,
    // arcs beyond `arc_num` are artificial: one per node, to or from root
    art_source: Vec<usize>,
    art_target: Vec<usize>,
    flow: Vec<f64>,
    state: Vec<i8>,
    pi: Vec<f64>,
    parent: Vec<isize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,
    root: usize,
    // pivot state
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
    next_arc: usize,
    block_size: usize,
    threshold: f64,
}

impl<'a> Simplex<'a> {
    fn source(&self, e: usize) -> usize {
        if e < self.arc_num {
            e / self.demand_count
        } else {
            self.art_source[e - self.arc_num]
        }
    }

    fn target(&self, e: usize) -> usize {
        if e < self.arc_num {
            self.supply_count + e % self.demand_count
        } else {
            self.art_target[e - self.arc_num]
        }
    }

    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.arc_num {
            self.cost[e]
        } else if self.art_source[e - self.arc_num] == self.root {
            self.art_cost
        } else {
            0.0
        }
    }

    fn new(supply: &[f64], demand: &[f64], cost: &'a [f64]) -> Self {
        let ns = supply.len();
        let nd = demand.len();
        let node_num = ns + nd;
        let arc_num = ns * nd;
        let root = node_num;
        let max_cost = cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let art_cost = (max_cost + 1.0) * node_num as f64;
        let all_arcs = arc_num + node_num;

        let mut s = Simplex {
            supply_count: ns,
            demand_count: nd,
            arc_num,
            cost,
            art_cost,
            art_source: vec![0; node_num],
            art_target: vec![0; node_num],
            flow: vec![0.0; all_arcs],
            state: vec![STATE_LOWER; all_arcs],
            pi: vec![0.0; node_num + 1],
            parent: vec![0; node_num + 1],
            pred: vec![0; node_num + 1],
            pred_dir: vec![0; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![0; node_num + 1],
            last_succ: vec![0; node_num + 1],
            dirty_revs: Vec::new(),
            root,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
            next_arc: 0,
            block_size: ((arc_num as f64).sqrt().ceil() as usize).max(10),
            threshold: -1e-9 * max_cost.max(f64::MIN_POSITIVE),
        };

        s.parent[root] = -1;
        s.pred[root] = usize::MAX;
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        s.pi[root] = 0.0;

        for u in 0..node_num {
            let e = arc_num + u;
            let b = if u < ns { supply[u] } else { -demand[u - ns] };
            s.parent[u] = root as isize;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = STATE_TREE;
            if b >= 0.0 {
                s.pred_dir[u] = DIR_UP;
                s.pi[u] = 0.0;
                s.art_source[u] = u;
                s.art_target[u] = root;
                s.flow[e] = b;
            } else {
                s.pred_dir[u] = DIR_DOWN;
                s.pi[u] = art_cost;
                s.art_source[u] = root;
                s.art_target[u] = u;
                s.flow[e] = -b;
            }
        }
        s
    }

    fn reduced(&self, e: usize) -> f64 {
        self.state[e] as f64
            * (self.arc_cost(e) + self.pi[self.source(e)] - self.pi[self.target(e)])
    }

    /// Block search over the original arcs only; artificial arcs never
    /// re-enter once they leave the tree.
    fn find_entering_arc(&mut self) -> bool {
        let mut min = self.threshold;
        let mut found = None;
        let mut cnt = self.block_size;
        let total = self.arc_num;
        let mut e = self.next_arc;
        for _ in 0..total {
            let c = self.reduced(e);
            if c < min {
                min = c;
                found = Some(e);
            }
            e += 1;
            if e == total {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found.is_some() {
                    break;
                }
                cnt = self.block_size;
            }
        }
        match found {
            Some(arc) => {
                self.in_arc = arc;
                self.next_arc = e;
                true
            }
            None => false,
        }
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u] as usize;
            } else {
                v = self.parent[v] as usize;
            }
        }
        self.join = u;
    }

    /// All arcs are uncapacitated, so only forward flows can block.
    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = if self.state[self.in_arc] == STATE_LOWER {
            (self.source(self.in_arc), self.target(self.in_arc))
        } else {
            (self.target(self.in_arc), self.source(self.in_arc))
        };
        self.delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == DIR_UP {
                let d = self.flow[self.pred[u]];
                if d < self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u] as usize;
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DIR_DOWN {
                let d = self.flow[self.pred[u]];
                if d <= self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u] as usize;
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

    fn change_flow(&mut self) {
        if self.delta > 0.0 {
            let val = self.state[self.in_arc] as f64 * self.delta;
            self.flow[self.in_arc] += val;
            let mut u = self.source(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u] as usize;
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as f64 * val;
                u = self.parent[u] as usize;
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        self.flow[out] = 0.0;
        self.state[out] = if self.flow[out] == 0.0 {
            STATE_LOWER
        } else {
            STATE_UPPER
        };
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out] as usize;

        if u_in == u_out {
            self.parent[u_in] = v_in as isize;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) { DIR_UP } else { DIR_DOWN };
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

            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem] as usize;
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem as isize;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem as isize;
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

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u] as usize;
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) { DIR_UP } else { DIR_DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out: isize = if self.last_succ[join] == v_in { join as isize } else { -1 };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in as isize;
        while u != -1 && self.last_succ[u as usize] == v_in {
            self.last_succ[u as usize] = last_succ_out;
            u = self.parent[u as usize];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out as isize;
            while u != up_limit_out && self.last_succ[u as usize] == old_last_succ {
                self.last_succ[u as usize] = old_rev_thread;
                u = self.parent[u as usize];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out as isize;
            while u != up_limit_out && self.last_succ[u as usize] == old_last_succ {
                self.last_succ[u as usize] = last_succ_out;
                u = self.parent[u as usize];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u] as usize;
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u] as usize;
        }
    }

    fn update_potential(&mut self) {
        let sigma = self.pi[self.v_in]
            - self.pi[self.u_in]
            - self.pred_dir[self.u_in] as f64 * self.arc_cost(self.in_arc);
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(&mut self, max_pivots: usize) -> Result<usize> {
        let mut pivots = 0;
        while self.find_entering_arc() {
            if pivots >= max_pivots {
                return Err(Error::SolverNonConvergence(max_pivots));
            }
            self.find_join_node();
            if !self.find_leaving_arc() {
                // an uncapacitated negative cycle cannot occur with
                // nonnegative costs; treat as solver failure
                return Err(Error::SolverNonConvergence(pivots));
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            pivots += 1;
        }
        Ok(pivots)
    }
}

/// Solves `min Σ c_ij f_ij` subject to row sums `supply` and column sums
/// `demand`, with `cost` dense row-major (`cost[i * demand.len() + j]`).
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    if supply.is_empty() || demand.is_empty() {
        return Err(Error::InvalidParameter("transport problem needs nonempty marginals".into()));
    }
    if cost.len() != supply.len() * demand.len() {
        return Err(Error::Dimension {
            expected: supply.len() * demand.len(),
            found: cost.len(),
        });
    }
    if supply.iter().chain(demand).any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidParameter("masses must be finite and nonnegative".into()));
    }
    if cost.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::InvalidParameter("costs must be finite and nonnegative".into()));
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    let gap = total_s - total_d;
    if gap.abs() > 1e-9 * total_s.max(total_d).max(1.0) {
        return Err(Error::MassMismatch(gap));
    }

    let mut s = Simplex::new(supply, demand, cost);
    let max_pivots = 50 * (s.arc_num + supply.len() + demand.len()) + 10_000;
    let pivots = s.run(max_pivots)?;

    let nd = demand.len();
    let mut total = 0.0;
    let mut flows = Vec::new();
    for e in 0..s.arc_num {
        let f = s.flow[e];
        if f != 0.0 {
            total += f * cost[e];
            flows.push((e / nd, e % nd, f));
        }
    }
    Ok(TransportPlan {
        cost: total,
        flows,
        pivots,
    })
}
