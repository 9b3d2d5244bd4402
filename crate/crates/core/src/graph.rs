//! Directed weighted communication graphs over followers and leaders.
//!
//! Agents carry contiguous labels: followers are `1..=n`, leaders are
//! `n+1..=n+m`. An edge `j -> i` with weight `a_ij > 0` means agent `i`
//! receives information from agent `j`. Leaders never receive.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Assumption, Error, Result};
use crate::linalg::{Lu, Matrix, PIVOT_TOL};

/// 1-based agent label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl AgentId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: AgentId,
    pub to: AgentId,
    pub weight: f64,
}

/// Communication topology, stored as in-neighbor lists keyed by target.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    m: usize,
    /// `in_edges[i]` lists `(source, weight)` sorted by source label.
    in_edges: Vec<Vec<(AgentId, f64)>>,
}

impl Graph {
    pub fn new(n: usize, m: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let total = n + m;
        let mut in_edges: Vec<Vec<(AgentId, f64)>> = vec![Vec::new(); total];
        for e in edges {
            for id in [e.from, e.to] {
                if id.0 == 0 || id.0 > total {
                    return Err(Error::InvalidGraph(format!(
                        "label {id} outside 1..={total}"
                    )));
                }
            }
            if e.from == e.to {
                return Err(Error::InvalidGraph(format!("self-loop at {}", e.to)));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "edge {} -> {} has non-positive weight {}",
                    e.from, e.to, e.weight
                )));
            }
            if e.to.0 > n {
                return Err(Error::InvalidGraph(format!(
                    "leader {} has incoming edge from {}",
                    e.to, e.from
                )));
            }
            let list = &mut in_edges[e.to.index()];
            if list.iter().any(|&(s, _)| s == e.from) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge {} -> {}",
                    e.from, e.to
                )));
            }
            list.push((e.from, e.weight));
        }
        for list in &mut in_edges {
            list.sort_by_key(|&(s, _)| s);
        }
        Ok(Self { n, m, in_edges })
    }

    /// Convenience constructor from `(from, to, weight)` triples.
    pub fn from_triples(n: usize, m: usize, triples: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(
            n,
            m,
            triples.iter().map(|&(f, t, w)| Edge {
                from: AgentId(f),
                to: AgentId(t),
                weight: w,
            }),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_agents(&self) -> usize {
        self.n + self.m
    }

    pub fn is_follower(&self, id: AgentId) -> bool {
        id.0 >= 1 && id.0 <= self.n
    }

    pub fn is_leader(&self, id: AgentId) -> bool {
        id.0 > self.n && id.0 <= self.n + self.m
    }

    pub fn followers(&self) -> impl Iterator<Item = AgentId> {
        (1..=self.n).map(AgentId)
    }

    pub fn leaders(&self) -> impl Iterator<Item = AgentId> {
        (self.n + 1..=self.n + self.m).map(AgentId)
    }

    pub fn in_edges(&self, id: AgentId) -> &[(AgentId, f64)] {
        &self.in_edges[id.index()]
    }

    /// Weight `a_{to,from}`, if the edge exists.
    pub fn weight(&self, to: AgentId, from: AgentId) -> Option<f64> {
        self.in_edges(to)
            .iter()
            .find(|&&(s, _)| s == from)
            .map(|&(_, w)| w)
    }

    /// Follower in-neighbors `N_i \ N_i^L` with weights.
    pub fn follower_in_edges(&self, i: AgentId) -> impl Iterator<Item = (AgentId, f64)> + '_ {
        let n = self.n;
        self.in_edges(i).iter().copied().filter(move |&(s, _)| s.0 <= n)
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.in_edges.iter().enumerate().flat_map(|(t, list)| {
            list.iter().map(move |&(s, w)| Edge {
                from: s,
                to: AgentId(t + 1),
                weight: w,
            })
        })
    }

    pub fn num_edges(&self) -> usize {
        self.in_edges.iter().map(Vec::len).sum()
    }

    fn out_adjacency(&self) -> Vec<Vec<AgentId>> {
        let mut out = vec![Vec::new(); self.num_agents()];
        for e in self.edges() {
            out[e.from.index()].push(e.to);
        }
        out
    }

    pub(crate) fn require_follower(&self, i: AgentId) -> Result<()> {
        if self.is_follower(i) {
            Ok(())
        } else if self.is_leader(i) {
            Err(Error::NotAFollower(i))
        } else {
            Err(Error::InvalidGraph(format!("unknown agent {i}")))
        }
    }

    pub(crate) fn require_leader(&self, k: AgentId) -> Result<()> {
        if self.is_leader(k) {
            Ok(())
        } else if self.is_follower(k) {
            Err(Error::NotALeader(k))
        } else {
            Err(Error::InvalidGraph(format!("unknown agent {k}")))
        }
    }
}

/// Follower/leader blocks of the graph Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianPartition {
    pub l1: Matrix,
    pub l2: Matrix,
    pub a_bar: Matrix,
    pub d_bar: Matrix,
}

pub fn laplacian_partition(g: &Graph) -> LaplacianPartition {
    let (n, m) = (g.n, g.m);
    let mut a_bar = Matrix::zeros(n, n);
    let mut d_bar = Matrix::zeros(n, n);
    let mut l2 = Matrix::zeros(n, m);
    for i in g.followers() {
        let r = i.index();
        for &(s, w) in g.in_edges(i) {
            d_bar[(r, r)] += w;
            if g.is_follower(s) {
                a_bar[(r, s.index())] = w;
            } else {
                l2[(r, s.0 - n - 1)] = -w;
            }
        }
    }
    let l1 = &d_bar - &a_bar;
    LaplacianPartition {
        l1,
        l2,
        a_bar,
        d_bar,
    }
}

/// Kahn topological order over all agents, `None` if a cycle exists.
pub fn topological_order(g: &Graph) -> Option<Vec<AgentId>> {
    let total = g.num_agents();
    let out = g.out_adjacency();
    let mut indeg: Vec<usize> = (0..total).map(|k| g.in_edges[k].len()).collect();
    let mut queue: VecDeque<usize> = (0..total).filter(|&k| indeg[k] == 0).collect();
    let mut order = Vec::with_capacity(total);
    while let Some(k) = queue.pop_front() {
        order.push(AgentId(k + 1));
        for t in &out[k] {
            indeg[t.index()] -= 1;
            if indeg[t.index()] == 0 {
                queue.push_back(t.index());
            }
        }
    }
    (order.len() == total).then_some(order)
}

/// Agents left over by Kahn's algorithm: those on a directed cycle or
/// downstream of one. Empty iff the graph is acyclic.
pub fn cycle_blocked(g: &Graph) -> Vec<AgentId> {
    let out = g.out_adjacency();
    let total = g.num_agents();
    let mut indeg: Vec<usize> = (0..total).map(|k| g.in_edges[k].len()).collect();
    let mut queue: VecDeque<usize> = (0..total).filter(|&k| indeg[k] == 0).collect();
    while let Some(k) = queue.pop_front() {
        for t in &out[k] {
            indeg[t.index()] -= 1;
            if indeg[t.index()] == 0 {
                queue.push_back(t.index());
            }
        }
    }
    (0..total).filter(|&k| indeg[k] > 0).map(|k| AgentId(k + 1)).collect()
}

/// Cycle test by iterative three-colour depth-first search.
pub fn is_acyclic(g: &Graph) -> bool {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let total = g.num_agents();
    let mut mark = vec![Mark::White; total];
    for root in 0..total {
        if mark[root] != Mark::White {
            continue;
        }
        // walk predecessors; a grey predecessor closes a cycle
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = Mark::Grey;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            let preds = &g.in_edges[v];
            if *next < preds.len() {
                let p = preds[*next].0.index();
                *next += 1;
                match mark[p] {
                    Mark::Grey => return false,
                    Mark::White => {
                        mark[p] = Mark::Grey;
                        stack.push((p, 0));
                    }
                    Mark::Black => {}
                }
            } else {
                mark[v] = Mark::Black;
                stack.pop();
            }
        }
    }
    true
}

pub fn every_follower_led(g: &Graph) -> bool {
    unled_followers(g).is_empty()
}

/// Followers with no directed path from any leader.
pub fn unled_followers(g: &Graph) -> Vec<AgentId> {
    let out = g.out_adjacency();
    let mut seen = vec![false; g.num_agents()];
    let mut queue: VecDeque<usize> = g.leaders().map(AgentId::index).collect();
    for &k in &queue {
        seen[k] = true;
    }
    while let Some(k) = queue.pop_front() {
        for t in &out[k] {
            if !seen[t.index()] {
                seen[t.index()] = true;
                queue.push_back(t.index());
            }
        }
    }
    (0..g.n).filter(|&k| !seen[k]).map(|k| AgentId(k + 1)).collect()
}

/// Followers with a directed path to `i` (the influential followers of `i`).
pub fn reachable_followers(g: &Graph, i: AgentId) -> Result<BTreeSet<AgentId>> {
    g.require_follower(i)?;
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([i]);
    while let Some(v) = queue.pop_front() {
        for (s, _) in g.follower_in_edges(v) {
            if s != i && seen.insert(s) {
                queue.push_back(s);
            }
        }
    }
    Ok(seen)
}

pub fn neighbor_leaders(g: &Graph, i: AgentId) -> Result<BTreeSet<AgentId>> {
    g.require_follower(i)?;
    Ok(g.in_edges(i)
        .iter()
        .map(|&(s, _)| s)
        .filter(|&s| g.is_leader(s))
        .collect())
}

/// Longest follower-only path (in edges) ending at `i`.
pub fn longest_influence_path(g: &Graph, i: AgentId) -> Result<usize> {
    g.require_follower(i)?;
    let lengths = longest_influence_paths(g)?;
    Ok(lengths[i.index()])
}

/// Longest follower-only path lengths ending at every follower.
pub fn longest_influence_paths(g: &Graph) -> Result<Vec<usize>> {
    let order = topological_order(g).ok_or_else(|| Error::AssumptionViolated {
        assumption: Assumption::Acyclic,
        detail: "graph contains a directed cycle".into(),
    })?;
    let mut len = vec![0usize; g.n];
    for v in order.into_iter().filter(|v| g.is_follower(*v)) {
        let best = g
            .follower_in_edges(v)
            .map(|(s, _)| len[s.index()] + 1)
            .max()
            .unwrap_or(0);
        len[v.index()] = best;
    }
    Ok(len)
}

/// Centralized influence matrix `−L₁⁻¹ L₂` (n × m).
pub fn global_phi(g: &Graph) -> Result<Matrix> {
    let part = laplacian_partition(g);
    let lu = Lu::factor(&part.l1, PIVOT_TOL).map_err(|e| Error::AssumptionViolated {
        assumption: Assumption::LeaderReachability,
        detail: format!("follower Laplacian block is singular ({e})"),
    })?;
    Ok(-lu.solve(&part.l2))
}

/// Random acyclic graph in which every follower is led.
///
/// Followers are shuffled into a hidden topological order; follower edges go
/// forward in that order with probability `edge_prob`. Followers without a
/// follower in-neighbor get at least one leader edge; other followers get a
/// leader edge with probability `edge_prob / 2`.
pub fn random_led_dag<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, edge_prob: f64) -> Graph {
    assert!(m >= 1, "at least one leader");
    let mut order: Vec<usize> = (1..=n).collect();
    for k in (1..order.len()).rev() {
        let j = rng.random_range(0..=k);
        order.swap(k, j);
    }
    let weight = |rng: &mut R| (rng.random_range(1..=20) as f64) / 10.0;
    let mut edges = Vec::new();
    for b in 0..n {
        let mut has_follower_in = false;
        for a in 0..b {
            if rng.random_bool(edge_prob) {
                edges.push(Edge {
                    from: AgentId(order[a]),
                    to: AgentId(order[b]),
                    weight: weight(rng),
                });
                has_follower_in = true;
            }
        }
        let mut leaders: Vec<usize> = Vec::new();
        if !has_follower_in {
            leaders.push(rng.random_range(0..m));
        }
        for k in 0..m {
            if rng.random_bool(edge_prob / 2.0) && !leaders.contains(&k) {
                leaders.push(k);
            }
        }
        for k in leaders {
            edges.push(Edge {
                from: AgentId(n + 1 + k),
                to: AgentId(order[b]),
                weight: weight(rng),
            });
        }
    }
    Graph::new(n, m, edges).expect("generator produces valid graphs")
}
