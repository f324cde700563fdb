//! Random m-regular review assignments, optionally cross-cluster only.
//!
//! Assignments are built in `m` rounds. Each round is a permutation of the
//! agents read as "reviewer i reviews perm\[i\]", so every agent is reviewed
//! exactly once per round and the result is exactly m-regular. A freshly
//! shuffled round usually contains a few forbidden entries (self-review,
//! repeat of an earlier round, own cluster); those are repaired by random
//! target swaps, and the round is redrawn only when repair stalls.
//!
//! Tight instances (m close to the number of permitted reviewees) can leave
//! the later rounds with no valid permutation at all. When the redraw budget
//! runs out, the assignment is instead built as a maximum flow, which finds an
//! m-regular assignment whenever one exists, and then randomised by
//! degree-preserving edge switches.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::domain::{Assignment, Instance};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// Round redraws allowed per assignment before giving up.
pub const DEFAULT_RETRY_BUDGET: usize = 1000;

/// Partition of the agents into `l` balanced cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    cells: Vec<Vec<usize>>,
    cluster_of: Vec<usize>,
}

impl Clustering {
    /// Uniformly random balanced partition: cell sizes differ by at most one.
    pub fn random(n: usize, l: usize, rng: &mut Rng) -> Result<Self> {
        if l == 0 || l > n {
            return Err(Error::InvalidParameter(format!(
                "cannot split {n} agents into {l} clusters"
            )));
        }
        let mut agents: Vec<usize> = (1..=n).collect();
        agents.shuffle(rng);
        let mut cells = vec![Vec::with_capacity(n / l + 1); l];
        for (pos, agent) in agents.into_iter().enumerate() {
            cells[pos % l].push(agent);
        }
        Clustering::from_cells(cells)
    }

    /// Cells must be nonempty, disjoint and cover `1..=n`.
    pub fn from_cells(mut cells: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = cells.iter().map(Vec::len).sum();
        let mut cluster_of = vec![usize::MAX; n];
        for (c, cell) in cells.iter_mut().enumerate() {
            if cell.is_empty() {
                return Err(Error::InvalidParameter(format!("cluster {c} is empty")));
            }
            cell.sort_unstable();
            for &a in cell.iter() {
                if a == 0 || a > n || cluster_of[a - 1] != usize::MAX {
                    return Err(Error::InvalidParameter(format!(
                        "agent {a} is out of range or in two clusters"
                    )));
                }
                cluster_of[a - 1] = c;
            }
        }
        Ok(Clustering { cells, cluster_of })
    }

    pub fn l(&self) -> usize {
        self.cells.len()
    }

    pub fn n(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c]
    }

    /// Index of the cluster containing `agent`.
    pub fn cluster_of(&self, agent: usize) -> usize {
        self.cluster_of[agent - 1]
    }

    pub fn is_balanced(&self) -> bool {
        let min = self.cells.iter().map(Vec::len).min().unwrap_or(0);
        let max = self.cells.iter().map(Vec::len).max().unwrap_or(0);
        max - min <= 1
    }

    /// Errors on the first review that stays inside the reviewer's cluster.
    pub fn check_respected_by(&self, assignment: &Assignment) -> Result<()> {
        if assignment.n() != self.n() {
            return Err(Error::InvalidParameter(format!(
                "clustering covers {} agents, assignment {}",
                self.n(),
                assignment.n()
            )));
        }
        for i in 1..=assignment.n() {
            for &j in assignment.pool(i) {
                if self.cluster_of(i) == self.cluster_of(j) {
                    return Err(Error::NotClusterRespecting {
                        reviewer: i,
                        reviewee: j,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Random m-regular assignment, deterministic in `seed`.
pub fn generate_assignment(instance: &Instance, seed: u64) -> Result<Assignment> {
    let mut rng = seed::rng(seed);
    build_rounds(
        instance.n(),
        instance.m(),
        None,
        &mut rng,
        DEFAULT_RETRY_BUDGET,
    )
}

/// Random balanced clustering into `l` cells plus an m-regular assignment in
/// which nobody reviews a member of their own cluster.
pub fn generate_clustered_assignment(
    instance: &Instance,
    l: usize,
    seed: u64,
) -> Result<(Clustering, Assignment)> {
    let (n, m) = (instance.n(), instance.m());
    let infeasible = Error::ClusteringInfeasible { n, m, l };
    if l < 2 || l > n {
        return Err(infeasible);
    }
    let largest = n.div_ceil(l);
    // The largest cluster sends largest·m reviews out and its complement can
    // absorb at most (n - largest)·m.
    if largest > n - largest || m > n - largest {
        return Err(infeasible);
    }
    let mut rng = seed::rng(seed);
    let clustering = Clustering::random(n, l, &mut rng)?;
    let assignment = build_rounds(n, m, Some(&clustering), &mut rng, DEFAULT_RETRY_BUDGET)?;
    Ok((clustering, assignment))
}

fn build_rounds(
    n: usize,
    m: usize,
    clustering: Option<&Clustering>,
    rng: &mut Rng,
    budget: usize,
) -> Result<Assignment> {
    if m == 0 || m >= n {
        return Err(Error::InvalidInstance(format!(
            "m={m} must satisfy 1 <= m <= n-1 = {}",
            n - 1
        )));
    }
    // 0-based agents throughout.
    let cluster: Vec<usize> = match clustering {
        Some(c) => (1..=n).map(|a| c.cluster_of(a)).collect(),
        None => (0..n).collect(),
    };
    let mut targets: Vec<Vec<usize>> = vec![Vec::with_capacity(m); n];
    let allowed = |targets: &[Vec<usize>], i: usize, t: usize| -> bool {
        t != i && cluster[i] != cluster[t] && !targets[i].contains(&t)
    };

    let max_swaps = 50 * n + 1000;
    let mut redraws = 0;
    let mut round = 0;
    let mut perm: Vec<usize> = (0..n).collect();
    while round < m {
        perm.shuffle(rng);
        let mut bad: Vec<usize> = (0..n).filter(|&i| !allowed(&targets, i, perm[i])).collect();
        let mut swaps = 0;
        while let Some(i) = bad.pop() {
            if allowed(&targets, i, perm[i]) {
                continue;
            }
            if swaps == max_swaps {
                bad.push(i);
                break;
            }
            swaps += 1;
            let j = rng.random_range(0..n);
            if allowed(&targets, i, perm[j]) && allowed(&targets, j, perm[i]) {
                perm.swap(i, j);
            } else {
                bad.push(i);
            }
        }
        if bad.is_empty() {
            for (i, &t) in perm.iter().enumerate() {
                targets[i].push(t);
            }
            round += 1;
        } else {
            redraws += 1;
            if redraws > budget {
                return build_by_flow(n, m, &cluster, rng).ok_or(Error::ClusteringInfeasible {
                    n,
                    m,
                    l: clustering.map_or(n, Clustering::l),
                });
            }
        }
    }
    Ok(to_assignment(targets))
}

fn to_assignment(targets: Vec<Vec<usize>>) -> Assignment {
    Assignment::from_pools(
        targets
            .into_iter()
            .map(|pool| pool.into_iter().map(|t| t + 1).collect())
            .collect(),
    )
}

/// Any m-regular assignment respecting `cluster` via max flow, then mixed by
/// random switches `(i→a, j→b) ⇒ (i→b, j→a)`. `None` when none exists.
fn build_by_flow(n: usize, m: usize, cluster: &[usize], rng: &mut Rng) -> Option<Assignment> {
    let permitted = |i: usize, t: usize| i != t && cluster[i] != cluster[t];
    // Nodes: source 0, reviewers 1..=n, reviewees n+1..=2n, sink 2n+1.
    let (source, sink) = (0, 2 * n + 1);
    let mut flow = FlowGraph::new(2 * n + 2);
    for i in 0..n {
        flow.add_edge(source, 1 + i, m);
        flow.add_edge(n + 1 + i, sink, m);
    }
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..n {
        order.shuffle(rng);
        for &t in &order {
            if permitted(i, t) {
                flow.add_edge(1 + i, n + 1 + t, 1);
            }
        }
    }
    if flow.max_flow(source, sink) < n * m {
        return None;
    }
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(n * m);
    for i in 0..n {
        for &e in &flow.adj[1 + i] {
            let edge = &flow.edges[e];
            if edge.to > n && edge.to <= 2 * n && edge.cap == 0 {
                edges.push((i, edge.to - n - 1));
            }
        }
    }
    let mut has = vec![false; n * n];
    for &(i, t) in &edges {
        has[i * n + t] = true;
    }
    for _ in 0..20 * n * m {
        let (x, y) = (
            rng.random_range(0..edges.len()),
            rng.random_range(0..edges.len()),
        );
        let ((i, a), (j, b)) = (edges[x], edges[y]);
        if i == j
            || a == b
            || !permitted(i, b)
            || !permitted(j, a)
            || has[i * n + b]
            || has[j * n + a]
        {
            continue;
        }
        has[i * n + a] = false;
        has[j * n + b] = false;
        has[i * n + b] = true;
        has[j * n + a] = true;
        edges[x] = (i, b);
        edges[y] = (j, a);
    }
    let mut targets = vec![Vec::with_capacity(m); n];
    for (i, t) in edges {
        targets[i].push(t);
    }
    Some(to_assignment(targets))
}

struct FlowEdge {
    to: usize,
    cap: usize,
}

/// Dinic's algorithm on unit-ish capacities.
struct FlowGraph {
    edges: Vec<FlowEdge>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn new(nodes: usize) -> Self {
        FlowGraph {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: usize) {
        self.adj[from].push(self.edges.len());
        self.edges.push(FlowEdge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(FlowEdge { to: from, cap: 0 });
    }

    fn max_flow(&mut self, source: usize, sink: usize) -> usize {
        let nodes = self.adj.len();
        let mut total = 0;
        loop {
            let mut level = vec![usize::MAX; nodes];
            level[source] = 0;
            let mut queue = std::collections::VecDeque::from([source]);
            while let Some(v) = queue.pop_front() {
                for &e in &self.adj[v] {
                    let to = self.edges[e].to;
                    if self.edges[e].cap > 0 && level[to] == usize::MAX {
                        level[to] = level[v] + 1;
                        queue.push_back(to);
                    }
                }
            }
            if level[sink] == usize::MAX {
                return total;
            }
            let mut next = vec![0usize; nodes];
            loop {
                let pushed = self.augment(source, sink, usize::MAX, &level, &mut next);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn augment(
        &mut self,
        v: usize,
        sink: usize,
        limit: usize,
        level: &[usize],
        next: &mut [usize],
    ) -> usize {
        if v == sink {
            return limit;
        }
        while next[v] < self.adj[v].len() {
            let e = self.adj[v][next[v]];
            let to = self.edges[e].to;
            if self.edges[e].cap > 0 && level[to] == level[v] + 1 {
                let pushed = self.augment(to, sink, limit.min(self.edges[e].cap), level, next);
                if pushed > 0 {
                    self.edges[e].cap -= pushed;
                    self.edges[e ^ 1].cap += pushed;
                    return pushed;
                }
            }
            next[v] += 1;
        }
        0
    }
}
