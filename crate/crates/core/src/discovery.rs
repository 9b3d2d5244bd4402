//! Synchronous message-passing discovery of each follower's local graph.
//!
//! Every follower starts from its own in-neighborhood and repeatedly merges
//! the sets of its follower in-neighbors. At the fixpoint follower `i` knows
//! its influential leaders, its influential followers and every edge of its
//! local graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Assumption, Error, Result};
use crate::graph::{self, AgentId, Graph};
use crate::par::Exec;

/// Edge weights keyed by `(to, from)`.
pub type EdgeMap = BTreeMap<(AgentId, AgentId), f64>;

/// One follower's discovery iterate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FollowerSets {
    pub leaders: BTreeSet<AgentId>,
    pub followers: BTreeSet<AgentId>,
    pub edges: EdgeMap,
}

impl FollowerSets {
    /// Initial iterate: direct leaders, `{i}` plus follower in-neighbors, and
    /// the follower's own incoming edges.
    pub fn initial(g: &Graph, i: AgentId) -> Self {
        let mut s = FollowerSets::default();
        s.followers.insert(i);
        for &(j, w) in g.in_edges(i) {
            if g.is_leader(j) {
                s.leaders.insert(j);
            } else {
                s.followers.insert(j);
            }
            s.edges.insert((i, j), w);
        }
        s
    }

    fn merge(&mut self, other: &FollowerSets) {
        self.leaders.extend(other.leaders.iter().copied());
        self.followers.extend(other.followers.iter().copied());
        for (&k, &w) in &other.edges {
            self.edges.insert(k, w);
        }
    }

    /// True when every set of `self` contains the corresponding set of `other`.
    pub fn contains(&self, other: &FollowerSets) -> bool {
        self.leaders.is_superset(&other.leaders)
            && self.followers.is_superset(&other.followers)
            && other.edges.keys().all(|k| self.edges.contains_key(k))
    }
}

/// Discovery iterates of all followers after `round` synchronous rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryState {
    pub sets: Vec<FollowerSets>,
    pub round: usize,
}

impl DiscoveryState {
    pub fn get(&self, i: AgentId) -> &FollowerSets {
        &self.sets[i.index()]
    }
}

pub fn init_discovery(g: &Graph) -> DiscoveryState {
    DiscoveryState {
        sets: g.followers().map(|i| FollowerSets::initial(g, i)).collect(),
        round: 0,
    }
}

/// One synchronous round: every follower unions its initial sets with the
/// previous-round sets of its follower in-neighbors.
pub fn discovery_round(g: &Graph, s: &DiscoveryState, exec: Exec) -> DiscoveryState {
    let sets = exec.map_indexed(g.n(), |k| {
        let i = AgentId(k + 1);
        let mut next = FollowerSets::initial(g, i);
        for (j, _) in g.follower_in_edges(i) {
            next.merge(&s.sets[j.index()]);
        }
        next
    });
    DiscoveryState {
        sets,
        round: s.round + 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryResult {
    pub sets: Vec<FollowerSets>,
    /// First round in which no follower changed.
    pub rounds_used: usize,
    /// Rounds in which at least one follower changed.
    pub content_rounds: usize,
    /// Last round in which each follower's sets changed (0 if never).
    pub last_change: Vec<usize>,
    /// Round at which each follower's own stopping test first holds: its sets
    /// did not change in this round and none of its follower in-neighbors
    /// changed in the previous one.
    pub stop_rounds: Vec<usize>,
    /// First round such that no follower changed in it or in the round before.
    pub quiet_round: usize,
}

impl DiscoveryResult {
    pub fn get(&self, i: AgentId) -> &FollowerSets {
        &self.sets[i.index()]
    }

    pub fn n(&self) -> usize {
        self.sets.len()
    }
}

pub(crate) fn check_discovery_assumptions(g: &Graph) -> Result<()> {
    if !graph::is_acyclic(g) {
        return Err(Error::AssumptionViolated {
            assumption: Assumption::Acyclic,
            detail: "graph contains a directed cycle".into(),
        });
    }
    if !graph::every_follower_led(g) {
        let unled: Vec<String> = g
            .followers()
            .filter(|&i| {
                graph::reachable_followers(g, i)
                    .map(|r| {
                        r.iter()
                            .chain(std::iter::once(&i))
                            .all(|&t| graph::neighbor_leaders(g, t).is_ok_and(|l| l.is_empty()))
                    })
                    .unwrap_or(false)
            })
            .map(|i| i.to_string())
            .collect();
        return Err(Error::AssumptionViolated {
            assumption: Assumption::LeaderReachability,
            detail: format!("followers without a leader path: {}", unled.join(", ")),
        });
    }
    Ok(())
}

/// Runs synchronous rounds until the global fixpoint and records both the
/// global and the per-follower stopping rounds.
pub fn run_discovery(g: &Graph, exec: Exec) -> Result<DiscoveryResult> {
    check_discovery_assumptions(g)?;
    let n = g.n();
    let mut prev = init_discovery(g);
    let mut last_change = vec![0usize; n];
    // round 0 counts as a change for every follower
    let mut changed_prev = vec![true; n];
    let mut stop_rounds: Vec<Option<usize>> = vec![None; n];
    let mut rounds_used = None;
    let mut prev_quiet = false;
    let quiet_round = loop {
        let cur = discovery_round(g, &prev, exec);
        let k = cur.round;
        let changed: Vec<bool> = (0..n).map(|t| cur.sets[t] != prev.sets[t]).collect();
        for t in 0..n {
            if changed[t] {
                last_change[t] = k;
            }
            let i = AgentId(t + 1);
            if stop_rounds[t].is_none()
                && !changed[t]
                && g.follower_in_edges(i).all(|(j, _)| !changed_prev[j.index()])
            {
                stop_rounds[t] = Some(k);
            }
        }
        let quiet = !changed.iter().any(|&c| c);
        if quiet && rounds_used.is_none() {
            rounds_used = Some(k);
        }
        prev = cur;
        changed_prev = changed;
        if quiet && prev_quiet {
            break k;
        }
        prev_quiet = quiet;
    };
    let rounds_used = rounds_used.expect("fixpoint reached");
    Ok(DiscoveryResult {
        sets: prev.sets,
        rounds_used,
        content_rounds: rounds_used - 1,
        last_change,
        stop_rounds: stop_rounds
            .into_iter()
            .map(|s| s.expect("every follower stops once the network is quiet"))
            .collect(),
        quiet_round,
    })
}

/// Reference sets computed from whole-graph reachability.
pub fn centralized_sets(g: &Graph, i: AgentId) -> Result<FollowerSets> {
    let mut sources = graph::reachable_followers(g, i)?;
    sources.insert(i);
    let mut out = FollowerSets::default();
    for t in sources {
        out.merge(&FollowerSets::initial(g, t));
    }
    Ok(out)
}

/// Serializable view of one follower's discovered sets.
#[derive(Debug, Clone, Serialize)]
pub struct FollowerSetsReport {
    pub follower: AgentId,
    pub leaders: Vec<AgentId>,
    pub followers: Vec<AgentId>,
    /// `[to, from, weight]` triples.
    pub edges: Vec<(AgentId, AgentId, f64)>,
    pub last_change: usize,
    pub stop_round: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscoveryReport {
    pub rounds_used: usize,
    pub content_rounds: usize,
    pub quiet_round: usize,
    pub followers: Vec<FollowerSetsReport>,
}

impl DiscoveryResult {
    pub fn report(&self) -> DiscoveryReport {
        DiscoveryReport {
            rounds_used: self.rounds_used,
            content_rounds: self.content_rounds,
            quiet_round: self.quiet_round,
            followers: self
                .sets
                .iter()
                .enumerate()
                .map(|(t, s)| FollowerSetsReport {
                    follower: AgentId(t + 1),
                    leaders: s.leaders.iter().copied().collect(),
                    followers: s.followers.iter().copied().collect(),
                    edges: s.edges.iter().map(|(&(a, b), &w)| (a, b, w)).collect(),
                    last_change: self.last_change[t],
                    stop_round: self.stop_rounds[t],
                })
                .collect(),
        }
    }
}
