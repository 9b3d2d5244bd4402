//! Adaptive distributed observer of the influential leaders.
//!
//! Each follower keeps one block per influential leader `λ` holding a state
//! estimate `η_i^λ` (q), a dynamics estimate `Ŝ_i^λ` (q×q) and an output
//! matrix estimate `D̂_i^λ` (Q×q). Blocks are stored contiguously in a flat
//! vector, followers in label order and each follower's blocks in ascending
//! leader order; matrices are column-major inside a block.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::discovery::DiscoveryResult;
use crate::error::{Error, Result};
use crate::graph::{AgentId, Graph};
use crate::linalg::{self, Matrix, Vector};
use crate::local_view::{sort_function, LocalView, SortFn};

/// Leader exo-system `ω̇ = S ω`, `y = D ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderModel {
    pub s: Matrix,
    pub d: Matrix,
}

impl LeaderModel {
    pub fn new(s: Matrix, d: Matrix) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::dim(format!(
                "leader S must be square, got {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
        if d.ncols() != s.nrows() {
            return Err(Error::dim(format!(
                "leader D has {} columns, S is {}x{}",
                d.ncols(),
                s.nrows(),
                s.nrows()
            )));
        }
        Ok(Self { s, d })
    }

    pub fn q(&self) -> usize {
        self.s.nrows()
    }

    /// Output dimension `Q`.
    pub fn outputs(&self) -> usize {
        self.d.nrows()
    }
}

/// Coupling gains `β^η`, `β^S`, `β^D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverGains {
    pub beta_eta: f64,
    pub beta_s: f64,
    pub beta_d: f64,
}

impl Default for ObserverGains {
    fn default() -> Self {
        Self {
            beta_eta: 1.0,
            beta_s: 1.0,
            beta_d: 1.0,
        }
    }
}

impl ObserverGains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta_eta", self.beta_eta),
            ("beta_s", self.beta_s),
            ("beta_d", self.beta_d),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Scenario(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// One `(follower, leader)` estimate block.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverBlock {
    pub eta: Vector,
    pub s_hat: Matrix,
    pub d_hat: Matrix,
}

/// All estimate blocks of one follower, in ascending leader order.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub leaders: Vec<AgentId>,
    pub blocks: Vec<ObserverBlock>,
}

impl ObserverState {
    pub fn block(&self, leader: AgentId) -> Option<&ObserverBlock> {
        self.leaders
            .binary_search(&leader)
            .ok()
            .map(|k| &self.blocks[k])
    }

    /// Stacked `η_i`.
    pub fn eta_stack(&self) -> Vector {
        let parts: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| b.eta.iter().copied())
            .collect();
        Vector::from_vec(parts)
    }

    /// Block-diagonal `D̄_i`.
    pub fn d_bar(&self) -> Matrix {
        let blocks: Vec<Matrix> = self.blocks.iter().map(|b| b.d_hat.clone()).collect();
        linalg::block_diag(&blocks)
    }

    /// Block-diagonal `S̄_i`.
    pub fn s_bar(&self) -> Matrix {
        let blocks: Vec<Matrix> = self.blocks.iter().map(|b| b.s_hat.clone()).collect();
        linalg::block_diag(&blocks)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct BlockCoupling {
    follower: AgentId,
    leader: AgentId,
    /// `(neighbor block, a_ij)` for follower in-neighbors that track the leader.
    neighbors: Vec<(usize, f64)>,
    /// Direct pinning weight `a_iλ`, if any.
    pin: Option<f64>,
}

/// Flat storage layout and coupling structure of the whole observer network.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverLayout {
    n: usize,
    q: usize,
    outputs: usize,
    follower_blocks: Vec<Range<usize>>,
    couplings: Vec<BlockCoupling>,
}

impl ObserverLayout {
    pub fn new(g: &Graph, views: &[LocalView], q: usize, outputs: usize) -> Result<Self> {
        if views.len() != g.n() {
            return Err(Error::dim(format!(
                "{} local views for {} followers",
                views.len(),
                g.n()
            )));
        }
        let mut follower_blocks = Vec::with_capacity(g.n());
        let mut start = 0;
        for v in views {
            follower_blocks.push(start..start + v.num_leaders());
            start += v.num_leaders();
        }
        let mut couplings = Vec::with_capacity(start);
        for (t, v) in views.iter().enumerate() {
            let i = AgentId(t + 1);
            for lam in v.mu_bar.iter() {
                let neighbors = g
                    .follower_in_edges(i)
                    .filter_map(|(j, a)| {
                        views[j.index()]
                            .mu_bar
                            .position(lam)
                            .map(|k| (follower_blocks[j.index()].start + k, a))
                    })
                    .collect();
                couplings.push(BlockCoupling {
                    follower: i,
                    leader: lam,
                    neighbors,
                    pin: g.weight(i, lam),
                });
            }
        }
        Ok(Self {
            n: g.n(),
            q,
            outputs,
            follower_blocks,
            couplings,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn num_followers(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.couplings.len()
    }

    pub fn block_len(&self) -> usize {
        self.q + self.q * self.q + self.outputs * self.q
    }

    /// Length of the flat observer vector.
    pub fn len(&self) -> usize {
        self.num_blocks() * self.block_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn blocks_of(&self, i: AgentId) -> Range<usize> {
        self.follower_blocks[i.index()].clone()
    }

    /// `(follower, leader)` owning block `b` (follower order).
    pub fn block_owner(&self, b: usize) -> (AgentId, AgentId) {
        (self.couplings[b].follower, self.couplings[b].leader)
    }

    pub fn block_index(&self, i: AgentId, leader: AgentId) -> Option<usize> {
        self.blocks_of(i)
            .find(|&b| self.couplings[b].leader == leader)
    }

    fn block_range(&self, b: usize) -> Range<usize> {
        let len = self.block_len();
        b * len..(b + 1) * len
    }

    pub fn read_block(&self, obs: &[f64], b: usize) -> ObserverBlock {
        let (q, qo) = (self.q, self.outputs);
        let s = &obs[self.block_range(b)];
        ObserverBlock {
            eta: Vector::from_column_slice(&s[..q]),
            s_hat: Matrix::from_column_slice(q, q, &s[q..q + q * q]),
            d_hat: Matrix::from_column_slice(qo, q, &s[q + q * q..]),
        }
    }

    pub fn write_block(&self, obs: &mut [f64], b: usize, block: &ObserverBlock) -> Result<()> {
        let (q, qo) = (self.q, self.outputs);
        if block.eta.len() != q
            || block.s_hat.shape() != (q, q)
            || block.d_hat.shape() != (qo, q)
        {
            return Err(Error::dim(format!(
                "observer block for {:?} has mismatched dimensions",
                self.block_owner(b)
            )));
        }
        let r = self.block_range(b);
        let s = &mut obs[r];
        s[..q].copy_from_slice(block.eta.as_slice());
        s[q..q + q * q].copy_from_slice(block.s_hat.as_slice());
        s[q + q * q..].copy_from_slice(block.d_hat.as_slice());
        Ok(())
    }

    pub fn read(&self, obs: &[f64], i: AgentId) -> ObserverState {
        let range = self.blocks_of(i);
        ObserverState {
            leaders: range.clone().map(|b| self.couplings[b].leader).collect(),
            blocks: range.map(|b| self.read_block(obs, b)).collect(),
        }
    }

    pub fn write(&self, obs: &mut [f64], i: AgentId, state: &ObserverState) -> Result<()> {
        let range = self.blocks_of(i);
        if state.blocks.len() != range.len() {
            return Err(Error::dim(format!(
                "follower {i} has {} observer blocks, expected {}",
                state.blocks.len(),
                range.len()
            )));
        }
        for (b, block) in range.zip(&state.blocks) {
            self.write_block(obs, b, block)?;
        }
        Ok(())
    }

    pub fn pack(&self, states: &[ObserverState]) -> Result<Vec<f64>> {
        if states.len() != self.n {
            return Err(Error::dim("one observer state per follower expected"));
        }
        let mut obs = vec![0.0; self.len()];
        for (t, s) in states.iter().enumerate() {
            self.write(&mut obs, AgentId(t + 1), s)?;
        }
        Ok(obs)
    }

    pub fn unpack(&self, obs: &[f64]) -> Vec<ObserverState> {
        (1..=self.n).map(|i| self.read(obs, AgentId(i))).collect()
    }
}

/// Leader models plus their current states, flat `ω` in leader order.
#[derive(Debug, Clone, Copy)]
pub struct LeaderSnapshot<'a> {
    pub n: usize,
    pub models: &'a [LeaderModel],
    /// Precomputed `[vec S_λ, vec D_λ]` per leader, see [`truth_blocks`].
    pub truth: &'a [Vec<f64>],
    pub omega: &'a [f64],
}

impl LeaderSnapshot<'_> {
    fn leader_index(&self, l: AgentId) -> usize {
        l.0 - self.n - 1
    }
}

/// `[vec S, vec D]` for each leader, the target of the `Ŝ`/`D̂` parts of a block.
pub fn truth_blocks(models: &[LeaderModel]) -> Vec<Vec<f64>> {
    models
        .iter()
        .map(|m| {
            m.s.as_slice()
                .iter()
                .chain(m.d.as_slice())
                .copied()
                .collect()
        })
        .collect()
}

/// Time derivative of block `b` written into `out` (length `block_len`).
fn block_derivative(
    layout: &ObserverLayout,
    b: usize,
    obs: &[f64],
    leaders: &LeaderSnapshot<'_>,
    gains: &ObserverGains,
    out: &mut [f64],
) {
    let q = layout.q;
    let c = &layout.couplings[b];
    let own = &obs[layout.block_range(b)];
    out.fill(0.0);
    for &(nb, a) in &c.neighbors {
        let other = &obs[layout.block_range(nb)];
        for k in 0..out.len() {
            out[k] += a * (other[k] - own[k]);
        }
    }
    if let Some(a) = c.pin {
        let li = leaders.leader_index(c.leader);
        let omega = &leaders.omega[li * q..(li + 1) * q];
        let truth = &leaders.truth[li];
        for k in 0..q {
            out[k] += a * (omega[k] - own[k]);
        }
        for k in q..out.len() {
            out[k] += a * (truth[k - q] - own[k]);
        }
    }
    let (eta, rest) = own.split_at(q);
    let s_hat = &rest[..q * q];
    for r in 0..q {
        let mut acc = 0.0;
        for col in 0..q {
            acc += s_hat[col * q + r] * eta[col];
        }
        out[r] = acc + gains.beta_eta * out[r];
    }
    for v in &mut out[q..q + q * q] {
        *v *= gains.beta_s;
    }
    for v in &mut out[q + q * q..] {
        *v *= gains.beta_d;
    }
}

/// Derivative of the whole flat observer vector.
pub fn observer_rates(
    layout: &ObserverLayout,
    obs: &[f64],
    leaders: &LeaderSnapshot<'_>,
    gains: &ObserverGains,
    out: &mut [f64],
) {
    let len = layout.block_len();
    for (b, chunk) in out.chunks_mut(len).enumerate().take(layout.num_blocks()) {
        block_derivative(layout, b, obs, leaders, gains, chunk);
    }
}

/// Derivative of follower `i`'s blocks given every follower's current state.
/// A neighbor that does not track a leader contributes nothing for that
/// leader's block.
pub fn observer_derivative(
    layout: &ObserverLayout,
    i: AgentId,
    states: &[ObserverState],
    leaders: &LeaderSnapshot<'_>,
    gains: &ObserverGains,
) -> Result<ObserverState> {
    let obs = layout.pack(states)?;
    let mut d = vec![0.0; layout.len()];
    let len = layout.block_len();
    for b in layout.blocks_of(i) {
        block_derivative(layout, b, &obs, leaders, gains, &mut d[b * len..(b + 1) * len]);
    }
    Ok(layout.read(&d, i))
}

/// Per-follower estimation error norms (Frobenius / Euclidean over all blocks).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimationError {
    pub s: f64,
    pub d: f64,
    pub eta: f64,
}

pub fn estimation_errors(
    layout: &ObserverLayout,
    obs: &[f64],
    leaders: &LeaderSnapshot<'_>,
) -> Vec<EstimationError> {
    let q = layout.q;
    (0..layout.n)
        .map(|t| {
            let (mut s2, mut d2, mut e2) = (0.0, 0.0, 0.0);
            for b in layout.follower_blocks[t].clone() {
                let own = &obs[layout.block_range(b)];
                let li = leaders.leader_index(layout.couplings[b].leader);
                let omega = &leaders.omega[li * q..(li + 1) * q];
                let truth = &leaders.truth[li];
                for k in 0..q {
                    e2 += (own[k] - omega[k]).powi(2);
                }
                for k in q..q + q * q {
                    s2 += (own[k] - truth[k - q]).powi(2);
                }
                for k in q + q * q..own.len() {
                    d2 += (own[k] - truth[k - q]).powi(2);
                }
            }
            EstimationError {
                s: s2.sqrt(),
                d: d2.sqrt(),
                eta: e2.sqrt(),
            }
        })
        .collect()
}

/// Reference output `y_i* = Σ_λ φ_λ D_λ ω_λ` of follower `i`.
pub fn virtual_reference(view: &LocalView, leaders: &LeaderSnapshot<'_>) -> Vector {
    let q = leaders.models.first().map_or(0, LeaderModel::q);
    let qo = leaders.models.first().map_or(0, LeaderModel::outputs);
    let mut y = Vector::zeros(qo);
    for (k, l) in view.mu_bar.iter().enumerate() {
        let li = leaders.leader_index(l);
        let omega = Vector::from_column_slice(&leaders.omega[li * q..(li + 1) * q]);
        y += view.phi[k] * (&leaders.models[li].d * omega);
    }
    y
}

/// `(Φ ⊗ I_Q) D̄_i η_i − y_i*`.
pub fn virtual_output_error(
    view: &LocalView,
    state: &ObserverState,
    leaders: &LeaderSnapshot<'_>,
) -> Result<Vector> {
    if state.leaders != view.leaders() {
        return Err(Error::dim(format!(
            "observer of follower {} tracks {:?}, view lists {:?}",
            view.follower,
            state.leaders,
            view.leaders()
        )));
    }
    let mut est = Vector::zeros(leaders.models.first().map_or(0, LeaderModel::outputs));
    for (k, b) in state.blocks.iter().enumerate() {
        est += view.phi[k] * (&b.d_hat * &b.eta);
    }
    Ok(est - virtual_reference(view, leaders))
}

/// Sampled test that `e^{S t}` stays bounded by `bound` and does not decay
/// to zero over `[0, horizon]`.
pub fn marginal_stability_check(s: &Matrix, horizon: f64, bound: f64) -> bool {
    const SAMPLES: usize = 5000;
    if !s.is_square() || s.nrows() == 0 {
        return s.nrows() == 0;
    }
    let q = s.nrows();
    let step = (s * (horizon / SAMPLES as f64)).exp();
    let mut phi = Matrix::identity(q, q);
    let initial = phi.norm();
    let floor = initial * initial / bound;
    for _ in 0..SAMPLES {
        phi = &step * &phi;
        let nrm = phi.norm();
        if !(nrm <= bound) || nrm < floor {
            return false;
        }
    }
    true
}

/// Default check: horizon 50, bound `100 ‖I‖_F`.
pub fn is_marginally_stable(s: &Matrix) -> bool {
    let q = s.nrows() as f64;
    marginal_stability_check(s, 50.0, 100.0 * q.sqrt())
}

/// Followers that track one leader, with the matrix governing their error.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilitySlice {
    pub leader: AgentId,
    /// Tracking followers in ascending order (empty when none).
    pub followers: Option<SortFn>,
    /// Laplacian of the edges among the slice plus the pinning diagonal.
    pub h: Matrix,
    /// Pinning weights `a_iλ` of each member (0 when not pinned).
    pub pins: Vec<f64>,
}

impl ReachabilitySlice {
    pub fn members(&self) -> &[AgentId] {
        self.followers.as_ref().map_or(&[], |s| s.ordered())
    }

    pub fn len(&self) -> usize {
        self.members().len()
    }

    pub fn is_empty(&self) -> bool {
        self.members().is_empty()
    }
}

pub fn build_reachability_slice(
    g: &Graph,
    leader: AgentId,
    d: &DiscoveryResult,
) -> Result<ReachabilitySlice> {
    g.require_leader(leader)?;
    let members: Vec<AgentId> = g
        .followers()
        .filter(|&i| d.get(i).leaders.contains(&leader))
        .collect();
    if members.is_empty() {
        return Ok(ReachabilitySlice {
            leader,
            followers: None,
            h: Matrix::zeros(0, 0),
            pins: Vec::new(),
        });
    }
    let sort = sort_function(&members)?;
    let l = members.len();
    let mut h = Matrix::zeros(l, l);
    let mut pins = vec![0.0; l];
    for (r, &i) in members.iter().enumerate() {
        for (j, a) in g.follower_in_edges(i) {
            if let Some(c) = sort.position(j) {
                h[(r, c)] -= a;
                h[(r, r)] += a;
            }
        }
        if let Some(a) = g.weight(i, leader) {
            pins[r] = a;
            h[(r, r)] += a;
        }
    }
    Ok(ReachabilitySlice {
        leader,
        followers: Some(sort),
        h,
        pins,
    })
}

/// All leader slices plus the block permutation between leader order
/// (slice by slice) and follower order (the flat observer layout).
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSet {
    pub slices: Vec<ReachabilitySlice>,
    /// `to_leader_order[b]` is the leader-order position of follower-order block `b`.
    pub to_leader_order: Vec<usize>,
    /// Inverse of `to_leader_order`.
    pub to_follower_order: Vec<usize>,
}

impl SliceSet {
    pub fn build(g: &Graph, d: &DiscoveryResult, layout: &ObserverLayout) -> Result<Self> {
        let slices: Vec<ReachabilitySlice> = g
            .leaders()
            .map(|l| build_reachability_slice(g, l, d))
            .collect::<Result<_>>()?;
        let total: usize = slices.iter().map(ReachabilitySlice::len).sum();
        if total != layout.num_blocks() {
            return Err(Error::dim(format!(
                "slices hold {total} blocks, observer layout {}",
                layout.num_blocks()
            )));
        }
        let mut to_follower_order = Vec::with_capacity(total);
        for s in &slices {
            for &i in s.members() {
                let b = layout.block_index(i, s.leader).ok_or_else(|| {
                    Error::dim(format!("follower {i} lacks a block for leader {}", s.leader))
                })?;
                to_follower_order.push(b);
            }
        }
        let mut to_leader_order = vec![usize::MAX; total];
        for (r, &b) in to_follower_order.iter().enumerate() {
            to_leader_order[b] = r;
        }
        Ok(Self {
            slices,
            to_leader_order,
            to_follower_order,
        })
    }

    /// Block-diagonal `diag(H_λ)` in leader order.
    pub fn h_leader_order(&self) -> Matrix {
        let blocks: Vec<Matrix> = self.slices.iter().map(|s| s.h.clone()).collect();
        linalg::block_diag(&blocks)
    }

    /// `P diag(H_λ) Pᵀ`: the same operator with blocks in follower order.
    pub fn h_follower_order(&self) -> Matrix {
        let hs = self.h_leader_order();
        let p = &self.to_leader_order;
        Matrix::from_fn(p.len(), p.len(), |r, c| hs[(p[r], p[c])])
    }

    /// Permutation matrix `P` with `x_follower = P x_leader` (block level).
    pub fn permutation_matrix(&self) -> Matrix {
        let k = self.to_leader_order.len();
        let mut p = Matrix::zeros(k, k);
        for (b, &r) in self.to_leader_order.iter().enumerate() {
            p[(b, r)] = 1.0;
        }
        p
    }

    /// Reorders a follower-order block stack (`block` rows per block) into leader order.
    pub fn to_leader_stack(&self, follower_stack: &Matrix, block: usize) -> Matrix {
        let mut out = Matrix::zeros(follower_stack.nrows(), follower_stack.ncols());
        for (b, &r) in self.to_leader_order.iter().enumerate() {
            out.rows_mut(r * block, block)
                .copy_from(&follower_stack.rows(b * block, block));
        }
        out
    }
}

/// The same follower-order operator built directly from the coupling
/// structure: `H[(i,λ),(j,λ)] = −a_ij` for tracking neighbors, diagonal
/// = tracking in-degree plus pinning weight.
pub fn h_follower_order_direct(layout: &ObserverLayout) -> Matrix {
    let k = layout.num_blocks();
    let mut h = Matrix::zeros(k, k);
    for (b, c) in layout.couplings.iter().enumerate() {
        for &(nb, a) in &c.neighbors {
            h[(b, nb)] -= a;
            h[(b, b)] += a;
        }
        if let Some(a) = c.pin {
            h[(b, b)] += a;
        }
    }
    h
}

/// `Ŝ − S` stacked over blocks (follower order), `(blocks·q) × q`.
pub fn s_error_stack(layout: &ObserverLayout, obs: &[f64], leaders: &LeaderSnapshot<'_>) -> Matrix {
    let q = layout.q;
    let mut out = Matrix::zeros(layout.num_blocks() * q, q);
    for b in 0..layout.num_blocks() {
        let blk = layout.read_block(obs, b);
        let li = leaders.leader_index(layout.couplings[b].leader);
        out.rows_mut(b * q, q)
            .copy_from(&(blk.s_hat - &leaders.models[li].s));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::run_discovery;
    use crate::graph::tests::example_graph;
    use crate::local_view::build_local_views;
    use crate::par::Exec;

    fn example_leaders() -> Vec<LeaderModel> {
        [[1.0, -3.0, 1.0, -1.0], [1.0, -4.0, 1.0, -1.0], [1.0, -5.0, 1.0, -1.0]]
            .iter()
            .map(|s| LeaderModel::new(Matrix::from_row_slice(2, 2, s), Matrix::identity(2, 2)).unwrap())
            .collect()
    }

    struct Setup {
        g: Graph,
        d: DiscoveryResult,
        views: Vec<LocalView>,
        layout: ObserverLayout,
    }

    fn setup() -> Setup {
        let g = example_graph();
        let d = run_discovery(&g, Exec::Sequential).unwrap();
        let views = build_local_views(&d, Exec::Sequential).unwrap();
        let layout = ObserverLayout::new(&g, &views, 2, 2).unwrap();
        Setup { g, d, views, layout }
    }

    #[test]
    fn layout_of_example() {
        let s = setup();
        assert_eq!(s.layout.num_blocks(), 2 + 2 + 3 + 1);
        assert_eq!(s.layout.block_len(), 2 + 4 + 4);
        assert_eq!(s.layout.block_owner(4), (AgentId(3), AgentId(5)));
        assert_eq!(s.layout.block_index(AgentId(4), AgentId(7)), Some(7));
    }

    #[test]
    fn slices_of_example() {
        let s = setup();
        let s7 = build_reachability_slice(&s.g, AgentId(7), &s.d).unwrap();
        assert_eq!(s7.members(), &[AgentId(3), AgentId(4)]);
        // followers 1 and 2 do not track leader 7, so their edges into 3 drop out
        assert_eq!(s7.h, Matrix::identity(2, 2));
        let s5 = build_reachability_slice(&s.g, AgentId(5), &s.d).unwrap();
        assert_eq!(s5.members(), &[AgentId(1), AgentId(2), AgentId(3)]);
        assert_eq!(
            s5.h,
            Matrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0, -1.0, 2.0])
        );
        let set = SliceSet::build(&s.g, &s.d, &s.layout).unwrap();
        assert_eq!(set.h_follower_order(), h_follower_order_direct(&s.layout));
        let p = set.permutation_matrix();
        assert_eq!(&p * p.transpose(), Matrix::identity(8, 8));
        assert_eq!(&p * set.h_leader_order() * p.transpose(), set.h_follower_order());
        for (r, &b) in set.to_follower_order.iter().enumerate() {
            assert_eq!(set.to_leader_order[b], r);
        }
    }

    #[test]
    fn single_pin_and_empty_slice() {
        let g = Graph::from_triples(1, 2, &[(2, 1, 0.4)]).unwrap();
        let d = run_discovery(&g, Exec::Sequential).unwrap();
        let s = build_reachability_slice(&g, AgentId(2), &d).unwrap();
        assert_eq!(s.h, Matrix::from_element(1, 1, 0.4));
        let e = build_reachability_slice(&g, AgentId(3), &d).unwrap();
        assert!(e.is_empty());
        assert!(build_reachability_slice(&g, AgentId(1), &d).is_err());
    }

    fn one_leader_setup(s_true: Matrix) -> (ObserverLayout, Vec<LeaderModel>) {
        let g = Graph::from_triples(1, 1, &[(2, 1, 1.0)]).unwrap();
        let d = run_discovery(&g, Exec::Sequential).unwrap();
        let views = build_local_views(&d, Exec::Sequential).unwrap();
        let q = s_true.nrows();
        let layout = ObserverLayout::new(&g, &views, q, q).unwrap();
        (layout, vec![LeaderModel::new(s_true, Matrix::identity(q, q)).unwrap()])
    }

    #[test]
    fn exact_estimate_is_invariant() {
        let s_true = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let (layout, models) = one_leader_setup(s_true.clone());
        let omega = [0.3, -0.7];
        let truth = truth_blocks(&models);
        let snap = LeaderSnapshot { n: 1, models: &models, truth: &truth, omega: &omega };
        let state = ObserverState {
            leaders: vec![AgentId(2)],
            blocks: vec![ObserverBlock {
                eta: Vector::from_column_slice(&omega),
                s_hat: s_true.clone(),
                d_hat: Matrix::identity(2, 2),
            }],
        };
        let dv = observer_derivative(&layout, AgentId(1), std::slice::from_ref(&state), &snap, &ObserverGains::default())
            .unwrap();
        let b = &dv.blocks[0];
        assert_eq!(b.s_hat, Matrix::zeros(2, 2));
        assert_eq!(b.d_hat, Matrix::zeros(2, 2));
        assert_eq!(b.eta, &s_true * Vector::from_column_slice(&omega));
        assert_eq!(virtual_output_error(&setup_view(), &state, &snap).unwrap().norm(), 0.0);
    }

    fn setup_view() -> LocalView {
        let g = Graph::from_triples(1, 1, &[(2, 1, 1.0)]).unwrap();
        let d = run_discovery(&g, Exec::Sequential).unwrap();
        build_local_views(&d, Exec::Sequential).unwrap().remove(0)
    }

    #[test]
    fn first_order_lag() {
        let s_true = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let (layout, models) = one_leader_setup(s_true.clone());
        let truth = truth_blocks(&models);
        let omega = [0.0, 0.0];
        let snap = LeaderSnapshot { n: 1, models: &models, truth: &truth, omega: &omega };
        let s_hat = Matrix::from_row_slice(2, 2, &[0.5, 0.0, 1.0, -1.0]);
        let state = ObserverState {
            leaders: vec![AgentId(2)],
            blocks: vec![ObserverBlock {
                eta: Vector::zeros(2),
                s_hat: s_hat.clone(),
                d_hat: Matrix::zeros(2, 2),
            }],
        };
        let dv = observer_derivative(&layout, AgentId(1), &[state], &snap, &ObserverGains::default())
            .unwrap();
        assert_eq!(dv.blocks[0].s_hat, &s_true - &s_hat);
        assert_eq!(dv.blocks[0].d_hat, Matrix::identity(2, 2));
    }

    #[test]
    fn zero_start_on_example_copies_pinned_leaders() {
        let s = setup();
        let models = example_leaders();
        let truth = truth_blocks(&models);
        let omega = [1.0, 0.0, 0.0, 1.0, -1.0, 0.5];
        let snap = LeaderSnapshot { n: 4, models: &models, truth: &truth, omega: &omega };
        let gains = ObserverGains { beta_eta: 1.0, beta_s: 2.0, beta_d: 1.0 };
        let zeros = vec![0.0; s.layout.len()];
        let states = s.layout.unpack(&zeros);
        for i in s.g.followers() {
            let dv = observer_derivative(&s.layout, i, &states, &snap, &gains).unwrap();
            for (k, &l) in dv.leaders.iter().enumerate() {
                let pin = s.g.weight(i, l).unwrap_or(0.0);
                let li = l.0 - 5;
                assert_eq!(dv.blocks[k].s_hat, &models[li].s * (2.0 * pin));
            }
        }
        // the flat kernel agrees with the per-follower form
        let mut flat = vec![0.0; s.layout.len()];
        observer_rates(&s.layout, &zeros, &snap, &gains, &mut flat);
        for i in s.g.followers() {
            let dv = observer_derivative(&s.layout, i, &states, &snap, &gains).unwrap();
            assert_eq!(s.layout.read(&flat, i), dv);
        }
    }

    #[test]
    fn errors_and_virtual_output() {
        let s = setup();
        let models = example_leaders();
        let truth = truth_blocks(&models);
        let omega = [1.0, 0.0, 0.0, 1.0, -1.0, 0.5];
        let snap = LeaderSnapshot { n: 4, models: &models, truth: &truth, omega: &omega };
        // exact estimates everywhere
        let mut obs = vec![0.0; s.layout.len()];
        for b in 0..s.layout.num_blocks() {
            let (_, l) = s.layout.block_owner(b);
            let li = l.0 - 5;
            s.layout
                .write_block(
                    &mut obs,
                    b,
                    &ObserverBlock {
                        eta: Vector::from_column_slice(&omega[2 * li..2 * li + 2]),
                        s_hat: models[li].s.clone(),
                        d_hat: models[li].d.clone(),
                    },
                )
                .unwrap();
        }
        for e in estimation_errors(&s.layout, &obs, &snap) {
            assert_eq!(e, EstimationError { s: 0.0, d: 0.0, eta: 0.0 });
        }
        // perturb η of follower 3 by e: error equals (Φ ⊗ I) D̄ e
        let mut st = s.layout.read(&obs, AgentId(3));
        let e = [0.1, -0.2, 0.3, 0.05, -0.4, 0.2];
        for (k, b) in st.blocks.iter_mut().enumerate() {
            b.eta[0] += e[2 * k];
            b.eta[1] += e[2 * k + 1];
        }
        let v3 = &s.views[2];
        let err = virtual_output_error(v3, &st, &snap).unwrap();
        let mut expect = Vector::zeros(2);
        for k in 0..3 {
            expect += v3.phi[k] * Vector::from_column_slice(&e[2 * k..2 * k + 2]);
        }
        assert!((err - expect).norm() < 1e-15);
    }

    #[test]
    fn marginal_stability() {
        assert!(is_marginally_stable(&Matrix::from_row_slice(2, 2, &[1.0, -3.0, 1.0, -1.0])));
        assert!(!is_marginally_stable(&Matrix::identity(2, 2)));
        assert!(is_marginally_stable(&Matrix::zeros(2, 2)));
        assert!(!is_marginally_stable(&(-Matrix::identity(2, 2))));
    }
}
