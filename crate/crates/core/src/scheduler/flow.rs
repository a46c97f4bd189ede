//! Successive-shortest-path min-cost flow over the job/data-center network,
//! followed by a canonicalisation pass that moves the optimum to the
//! lexicographically smallest optimal assignment.
//!
//! Network: source → job (cap 1) → data center (cap 1, cost C(j,d)) → sink
//! (cap S_max). In incoming-capacity mode a running job reaches the sink
//! from its own data center through a bypass arc that skips the capacity
//! arc.

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use super::instance::{Prepared, RoundInstance};
use super::{CapacityMode, SchedulerError};

const UNSET: usize = usize::MAX;

struct Network {
    to: Vec<usize>,
    cap: Vec<i32>,
    cost: Vec<i64>,
    adj: Vec<Vec<usize>>,
    potential: Vec<i64>,
}

impl Network {
    fn new(nodes: usize) -> Self {
        Self {
            to: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
            adj: vec![Vec::new(); nodes],
            potential: vec![0; nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i32, cost: i64) -> usize {
        let e = self.to.len();
        self.to.extend([to, from]);
        self.cap.extend([cap, 0]);
        self.cost.extend([cost, -cost]);
        self.adj[from].push(e);
        self.adj[to].push(e + 1);
        e
    }

    fn from(&self, e: usize) -> usize {
        self.to[e ^ 1]
    }

    fn reduced_cost(&self, e: usize) -> i64 {
        self.cost[e] + self.potential[self.from(e)] - self.potential[self.to[e]]
    }

    fn push(&mut self, e: usize, amount: i32) {
        self.cap[e] -= amount;
        self.cap[e ^ 1] += amount;
    }

    /// Sends up to `limit` units from `source` to `sink` along successive
    /// cheapest paths. All arc costs must be non-negative initially.
    fn min_cost_flow(&mut self, source: usize, sink: usize, limit: usize) -> usize {
        let n = self.adj.len();
        let mut flow = 0;
        let mut dist = vec![i64::MAX; n];
        let mut parent = vec![UNSET; n];
        while flow < limit {
            dist.fill(i64::MAX);
            parent.fill(UNSET);
            dist[source] = 0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0_i64, source)));
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &e in &self.adj[u] {
                    if self.cap[e] <= 0 {
                        continue;
                    }
                    let v = self.to[e];
                    let nd = d + self.reduced_cost(e);
                    if nd < dist[v] {
                        dist[v] = nd;
                        parent[v] = e;
                        heap.push(Reverse((nd, v)));
                    }
                }
            }
            let reach = dist[sink];
            if reach == i64::MAX {
                break;
            }
            // Keeps reduced costs non-negative on every residual arc,
            // including arcs leaving nodes the search did not reach.
            for (p, d) in self.potential.iter_mut().zip(&dist) {
                *p += (*d).min(reach);
            }
            let mut v = sink;
            while v != source {
                let e = parent[v];
                self.push(e, 1);
                v = self.from(e);
            }
            flow += 1;
        }
        flow
    }

    /// A path from `start` to `target` over residual arcs of zero reduced
    /// cost that avoids `blocked` nodes.
    fn zero_cost_path(&self, start: usize, target: usize, blocked: &[bool]) -> Option<Vec<usize>> {
        let mut parent = vec![UNSET; self.adj.len()];
        let mut seen = vec![false; self.adj.len()];
        let mut queue = VecDeque::new();
        seen[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            if u == target {
                let mut path = Vec::new();
                let mut v = target;
                while v != start {
                    let e = parent[v];
                    path.push(e);
                    v = self.from(e);
                }
                return Some(path);
            }
            for &e in &self.adj[u] {
                let v = self.to[e];
                if seen[v] || blocked[v] || self.cap[e] <= 0 || self.reduced_cost(e) != 0 {
                    continue;
                }
                seen[v] = true;
                parent[v] = e;
                queue.push_back(v);
            }
        }
        None
    }
}

/// Returns the data-center index of every active job.
pub(super) fn solve(inst: &RoundInstance, prep: &Prepared) -> Result<Vec<usize>, SchedulerError> {
    let jobs = prep.active.len();
    let dcs = inst.dc_ids.len();
    let source = 0;
    let job_node = |a: usize| 1 + a;
    let dc_node = |d: usize| 1 + jobs + d;
    let sink = 1 + jobs + dcs;
    let mut net = Network::new(sink + 1);

    // (dc index, arc) per active job, ascending by dc index.
    let mut options: Vec<Vec<(usize, usize)>> = Vec::with_capacity(jobs);
    for (a, &j) in prep.active.iter().enumerate() {
        let job = &inst.jobs[j];
        net.add_edge(source, job_node(a), 1, 0);
        let mut opts = Vec::new();
        for d in 0..dcs {
            if !job.feasible[d] {
                continue;
            }
            let c = prep.qcost[a][d];
            let bypass = inst.mode == CapacityMode::Incoming && job.current_dc == Some(d);
            let e = if bypass {
                net.add_edge(job_node(a), sink, 1, c)
            } else {
                net.add_edge(job_node(a), dc_node(d), 1, c)
            };
            opts.push((d, e));
        }
        options.push(opts);
    }
    for d in 0..dcs {
        net.add_edge(dc_node(d), sink, inst.capacity[d] as i32, 0);
    }

    let routed = net.min_cost_flow(source, sink, jobs);
    if routed < jobs {
        let running = prep
            .active
            .iter()
            .filter(|j| inst.jobs[**j].current_dc.is_some())
            .count();
        return Err(SchedulerError::RunningJobsExceedCapacity {
            jobs: running,
            capacity: inst.capacity.iter().map(|c| *c as usize).sum(),
        });
    }

    // Walk jobs in id order and move each to its smallest data center that
    // some optimal assignment (agreeing on earlier jobs) uses. Two optimal
    // flows differ by cycles of zero reduced cost, so it suffices to look
    // for such a cycle through the candidate arc.
    let mut blocked = vec![false; net.adj.len()];
    for (a, opts) in options.iter().enumerate() {
        for &(_, e) in opts {
            if net.cap[e] == 0 {
                break;
            }
            if net.reduced_cost(e) != 0 {
                continue;
            }
            if let Some(path) = net.zero_cost_path(net.to[e], job_node(a), &blocked) {
                net.push(e, 1);
                for p in path {
                    net.push(p, 1);
                }
                break;
            }
        }
        blocked[job_node(a)] = true;
    }

    Ok(options
        .iter()
        .map(|opts| {
            opts.iter()
                .find(|(_, e)| net.cap[*e] == 0)
                .map(|(d, _)| *d)
                .expect("every routed job uses exactly one option arc")
        })
        .collect())
}
