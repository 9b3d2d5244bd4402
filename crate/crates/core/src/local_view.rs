//! Local Laplacian blocks and normalized influence rows built from discovery.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::discovery::{DiscoveryResult, FollowerSets};
use crate::error::{Assumption, Error, Result};
use crate::graph::AgentId;
use crate::linalg::{self, Lu, Matrix, PIVOT_TOL};
use crate::par::Exec;

/// Ascending enumeration of a finite label set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct SortFn {
    ordered: Vec<AgentId>,
}

impl SortFn {
    pub fn ordered(&self) -> &[AgentId] {
        &self.ordered
    }

    pub fn len(&self) -> usize {
        self.ordered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered.is_empty()
    }

    /// 0-based position of `id`.
    pub fn position(&self, id: AgentId) -> Option<usize> {
        self.ordered.binary_search(&id).ok()
    }

    /// 1-based rank of `id`.
    pub fn rank(&self, id: AgentId) -> Option<usize> {
        self.position(id).map(|p| p + 1)
    }

    /// Label at 1-based rank `k`.
    pub fn at(&self, k: usize) -> AgentId {
        self.ordered[k - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.ordered.iter().copied()
    }
}

pub fn sort_function<'a>(labels: impl IntoIterator<Item = &'a AgentId>) -> Result<SortFn> {
    let set: BTreeSet<AgentId> = labels.into_iter().copied().collect();
    if set.is_empty() {
        return Err(Error::InvalidGraph("sort function of an empty label set".into()));
    }
    Ok(SortFn {
        ordered: set.into_iter().collect(),
    })
}

/// Follower `i`'s locally built Laplacian blocks and influence row.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalView {
    pub follower: AgentId,
    pub mu: SortFn,
    pub mu_bar: SortFn,
    pub a_local: Matrix,
    pub a2_local: Matrix,
    pub d_local: Matrix,
    pub l1_local: Matrix,
    pub l2_local: Matrix,
    pub upsilon: Vec<f64>,
    /// Influence of each leader in `mu_bar` order.
    pub phi: Vec<f64>,
}

impl LocalView {
    pub fn leaders(&self) -> &[AgentId] {
        self.mu_bar.ordered()
    }

    pub fn num_leaders(&self) -> usize {
        self.mu_bar.len()
    }

    /// Influence row by full solve `−Υ L₁⁻¹ L₂`.
    pub fn phi_via_full_solve(&self) -> Result<Vec<f64>> {
        let lu = Lu::factor(&self.l1_local, PIVOT_TOL)?;
        let x = lu.solve(&self.l2_local);
        let r = self.mu.position(self.follower).expect("follower in own set");
        Ok(x.row(r).iter().map(|v| -v).collect())
    }

    /// Influence row over all `m` leaders (labels `n+1..=n+m`), zero for
    /// leaders outside the local graph.
    pub fn phi_over_all_leaders(&self, n: usize, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (k, l) in self.mu_bar.iter().enumerate() {
            out[l.0 - n - 1] = self.phi[k];
        }
        out
    }

    /// Influence of leader `l`, zero if it does not influence this follower.
    pub fn phi_of(&self, l: AgentId) -> f64 {
        self.mu_bar.position(l).map_or(0.0, |k| self.phi[k])
    }
}

pub fn build_local_view(i: AgentId, d: &DiscoveryResult) -> Result<LocalView> {
    if i.0 == 0 || i.0 > d.n() {
        return Err(Error::NotAFollower(i));
    }
    build_from_sets(i, d.get(i))
}

pub fn build_from_sets(i: AgentId, s: &FollowerSets) -> Result<LocalView> {
    let mu = sort_function(&s.followers)?;
    let mu_bar = sort_function(&s.leaders).map_err(|_| Error::AssumptionViolated {
        assumption: Assumption::LeaderReachability,
        detail: format!("follower {i} has no influential leader"),
    })?;
    let (l, lb) = (mu.len(), mu_bar.len());
    let a_local = Matrix::from_fn(l, l, |k, c| {
        s.edges
            .get(&(mu.ordered[k], mu.ordered[c]))
            .copied()
            .unwrap_or(0.0)
    });
    let a2_local = Matrix::from_fn(l, lb, |k, c| {
        s.edges
            .get(&(mu.ordered[k], mu_bar.ordered[c]))
            .copied()
            .unwrap_or(0.0)
    });
    let mut d_local = Matrix::zeros(l, l);
    for k in 0..l {
        d_local[(k, k)] = a_local.row(k).sum() + a2_local.row(k).sum();
    }
    let l1_local = &d_local - &a_local;
    let l2_local = -&a2_local;
    let r = mu.position(i).ok_or_else(|| {
        Error::InvalidGraph(format!("follower {i} missing from its own follower set"))
    })?;
    let mut upsilon = vec![0.0; l];
    upsilon[r] = 1.0;

    // Φ = −Υ L₁⁻¹ L₂ = −zᵀ L₂ with L₁ᵀ z = Υᵀ
    let lu = Lu::factor(&l1_local, PIVOT_TOL).map_err(|e| Error::AssumptionViolated {
        assumption: Assumption::LeaderReachability,
        detail: format!("local Laplacian block of follower {i} is singular ({e})"),
    })?;
    let z = lu.solve_transpose_vec(&upsilon);
    let phi = (0..lb)
        .map(|c| -(0..l).map(|k| z[k] * l2_local[(k, c)]).sum::<f64>())
        .collect();
    Ok(LocalView {
        follower: i,
        mu,
        mu_bar,
        a_local,
        a2_local,
        d_local,
        l1_local,
        l2_local,
        upsilon,
        phi,
    })
}

pub fn build_local_views(d: &DiscoveryResult, exec: Exec) -> Result<Vec<LocalView>> {
    exec.try_map_indexed(d.n(), |k| build_local_view(AgentId(k + 1), d))
}

/// Convex-weight test on an influence row.
pub fn phi_is_convex(phi: &[f64], tol: f64) -> bool {
    (phi.iter().sum::<f64>() - 1.0).abs() <= tol && phi.iter().all(|&v| v >= -tol)
}

pub fn validate_influence(v: &LocalView, tol: f64) -> bool {
    phi_is_convex(&v.phi, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalViewReport {
    pub follower: AgentId,
    pub followers: Vec<AgentId>,
    pub leaders: Vec<AgentId>,
    pub phi: Vec<f64>,
    pub phi_sum: f64,
    pub l1_local: Vec<Vec<f64>>,
    pub l2_local: Vec<Vec<f64>>,
    pub upsilon: Vec<f64>,
}

impl LocalView {
    pub fn report(&self) -> LocalViewReport {
        LocalViewReport {
            follower: self.follower,
            followers: self.mu.ordered.clone(),
            leaders: self.mu_bar.ordered.clone(),
            phi: self.phi.clone(),
            phi_sum: self.phi.iter().sum(),
            l1_local: linalg::to_rows(&self.l1_local),
            l2_local: linalg::to_rows(&self.l2_local),
            upsilon: self.upsilon.clone(),
        }
    }
}
