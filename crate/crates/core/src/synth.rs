//! Regulator equations, feedback and feedforward gains, and the closed-loop
//! certificate.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Assumption, Error, Result};
use crate::graph::AgentId;
use crate::linalg::{self, Lu, Matrix, Vector, PIVOT_TOL};
use crate::local_view::LocalView;
use crate::observer::{LeaderModel, ObserverGains, ObserverLayout, SliceSet};
use crate::par::Exec;

/// Follower plant `ẋ = A x + B u`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerModel {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

impl FollowerModel {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || c.ncols() != n {
            return Err(Error::dim(format!(
                "follower model A {}x{}, B {}x{}, C {}x{} are not conformable",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn c_full_row_rank(&self) -> bool {
        linalg::rank(&self.c, 1e-10) == self.c.nrows()
    }

    /// Rank test on `[B, AB, …, A^{N−1}B]`; sufficient for stabilizability.
    pub fn is_controllable(&self) -> bool {
        let n = self.states();
        let p = self.inputs();
        let mut ctrb = Matrix::zeros(n, n * p);
        let mut blk = self.b.clone();
        for k in 0..n {
            ctrb.view_mut((0, k * p), (n, p)).copy_from(&blk);
            blk = &self.a * blk;
        }
        linalg::rank(&ctrb, 1e-10) == n
    }

    /// Hautus test: `[A − λI, B]` has full row rank at every eigenvalue of
    /// `A` with non-negative real part.
    pub fn is_stabilizable(&self) -> bool {
        if self.is_controllable() {
            return true;
        }
        let n = self.states();
        let p = self.inputs();
        self.a.complex_eigenvalues().iter().all(|&lam| {
            if lam.re < -1e-9 {
                return true;
            }
            // [A − λI, B] = P + iQ has the singular values of [[P, −Q], [Q, P]],
            // each repeated twice.
            let mut p_re = Matrix::zeros(n, n + p);
            p_re.view_mut((0, 0), (n, n)).copy_from(&self.a);
            p_re.view_mut((0, n), (n, p)).copy_from(&self.b);
            for k in 0..n {
                p_re[(k, k)] -= lam.re;
            }
            let mut q_im = Matrix::zeros(n, n + p);
            for k in 0..n {
                q_im[(k, k)] = -lam.im;
            }
            let mut emb = Matrix::zeros(2 * n, 2 * (n + p));
            emb.view_mut((0, 0), (n, n + p)).copy_from(&p_re);
            emb.view_mut((0, n + p), (n, n + p)).copy_from(&(-&q_im));
            emb.view_mut((n, 0), (n, n + p)).copy_from(&q_im);
            emb.view_mut((n, n + p), (n, n + p)).copy_from(&p_re);
            linalg::rank(&emb, 1e-10) == 2 * n
        })
    }
}

/// Numerical tolerances of the synthesis checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Residual bound on both regulator equations.
    pub regulator: f64,
    /// Residual bound on the closed-loop certificate.
    pub closed_loop: f64,
    /// Bound on `|det(sI − A − BK₁)|` at each desired pole.
    pub pole: f64,
    /// Pivot below which the Sylvester operator counts as singular.
    pub sylvester_pivot: f64,
    /// Relative singular-value cutoff for least-squares solves.
    pub rank: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            regulator: 1e-9,
            closed_loop: 1e-8,
            pole: 1e-6,
            sylvester_pivot: 1e-10,
            rank: 1e-12,
        }
    }
}

/// Solves `A X − X Λ = Q` through `(I ⊗ A − Λᵀ ⊗ I) vec X = vec Q`.
pub fn solve_sylvester(a: &Matrix, lam: &Matrix, q: &Matrix) -> Result<Matrix> {
    solve_sylvester_with(a, lam, q, ToleranceConfig::default().sylvester_pivot)
}

pub fn solve_sylvester_with(a: &Matrix, lam: &Matrix, q: &Matrix, pivot: f64) -> Result<Matrix> {
    let (p, r) = (a.nrows(), lam.nrows());
    if !a.is_square() || !lam.is_square() || q.shape() != (p, r) {
        return Err(Error::dim(format!(
            "Sylvester shapes A {:?}, Λ {:?}, Q {:?}",
            a.shape(),
            lam.shape(),
            q.shape()
        )));
    }
    let op = linalg::kron(&Matrix::identity(r, r), a) - linalg::kron(&lam.transpose(), &Matrix::identity(p, p));
    let lu = Lu::factor(&op, pivot).map_err(|_| Error::SpectraOverlap)?;
    let x = lu.solve_vec(q.as_slice());
    Ok(linalg::unvec(&x, p, r))
}

/// Lyapunov test: `Mᵀ P + P M = −I` has a positive definite solution.
pub fn is_hurwitz(m: &Matrix) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    if n == 0 {
        return true;
    }
    match solve_sylvester(&m.transpose(), &(-m), &(-Matrix::identity(n, n))) {
        Ok(p) => {
            let sym = (&p + p.transpose()) * 0.5;
            sym.iter().all(|v| v.is_finite()) && linalg::is_positive_definite(&sym)
        }
        Err(_) => false,
    }
}

/// Block-diagonal leader dynamics and output stacks for one follower.
pub fn leader_stacks(view: &LocalView, leaders: &[LeaderModel], n: usize) -> (Matrix, Matrix) {
    let s: Vec<Matrix> = view.mu_bar.iter().map(|l| leaders[l.0 - n - 1].s.clone()).collect();
    let d: Vec<Matrix> = view.mu_bar.iter().map(|l| leaders[l.0 - n - 1].d.clone()).collect();
    (linalg::block_diag(&s), linalg::block_diag(&d))
}

/// `(Φ ⊗ I_Q) D̄̄`: the follower's reference output map.
pub fn reference_map(phi: &[f64], d_stack: &Matrix, outputs: usize) -> Result<Matrix> {
    let row = Matrix::from_row_slice(1, phi.len(), phi);
    let r = linalg::kron(&row, &Matrix::identity(outputs, outputs));
    if r.ncols() != d_stack.nrows() {
        return Err(Error::dim(format!(
            "Φ ⊗ I has {} columns, output stack has {} rows",
            r.ncols(),
            d_stack.nrows()
        )));
    }
    Ok(r * d_stack)
}

/// Regulator solution with its residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSolution {
    pub pi: Matrix,
    pub gamma: Matrix,
    /// `‖Π S̄̄ − A Π − B Γ‖_F`.
    pub residual_dynamics: f64,
    /// `‖C Π − (Φ ⊗ I) D̄̄‖_F`.
    pub residual_output: f64,
}

/// Solves `Π S̄̄ = A Π + B Γ`, `C Π = (Φ ⊗ I_Q) D̄̄`.
///
/// Among all solutions this returns the one with minimum-norm `Π`, then the
/// minimum-norm `Γ` for that `Π`. With invertible `B` this is
/// `Π = Cᵀ(CCᵀ)⁻¹(Φ ⊗ I)D̄̄`, `Γ = B⁻¹(Π S̄̄ − A Π)`, solved directly.
pub fn solve_regulator(
    follower: AgentId,
    f: &FollowerModel,
    s_stack: &Matrix,
    d_stack: &Matrix,
    phi: &[f64],
    tol: &ToleranceConfig,
) -> Result<RegulatorSolution> {
    let reference = reference_map(phi, d_stack, f.outputs())?;
    if s_stack.nrows() != reference.ncols() || !s_stack.is_square() {
        return Err(Error::dim("leader dynamics stack does not match the output stack"));
    }
    let direct = if f.b.is_square() {
        Lu::factor(&f.b, PIVOT_TOL).ok()
    } else {
        None
    };
    let (pi, gamma) = match (direct, Lu::factor(&(&f.c * f.c.transpose()), PIVOT_TOL)) {
        (Some(b_lu), Ok(cc_lu)) => {
            let pi = f.c.transpose() * cc_lu.solve(&reference);
            let gamma = b_lu.solve(&(&pi * s_stack - &f.a * &pi));
            (pi, gamma)
        }
        _ => regulator_general(f, s_stack, &reference, tol.rank)?,
    };
    let residual_dynamics = (&pi * s_stack - &f.a * &pi - &f.b * &gamma).norm();
    let residual_output = (&f.c * &pi - &reference).norm();
    if !(residual_dynamics <= tol.regulator && residual_output <= tol.regulator) {
        return Err(Error::RegulatorUnsolvable {
            follower,
            residual: residual_dynamics.max(residual_output),
        });
    }
    Ok(RegulatorSolution {
        pi,
        gamma,
        residual_dynamics,
        residual_output,
    })
}

fn regulator_general(
    f: &FollowerModel,
    s_stack: &Matrix,
    reference: &Matrix,
    rel_tol: f64,
) -> Result<(Matrix, Matrix)> {
    let (n, k) = (f.states(), s_stack.nrows());
    let b_pinv = f
        .b
        .clone()
        .pseudo_inverse(rel_tol * f.b.norm().max(1.0))
        .map_err(|e| Error::Synthesis(e.to_string()))?;
    // (I − B B⁺)(Π S̄̄ − A Π) = 0 keeps Π S̄̄ − A Π inside the range of B.
    let proj = Matrix::identity(n, n) - &f.b * &b_pinv;
    let sylv = linalg::kron(&s_stack.transpose(), &Matrix::identity(n, n))
        - linalg::kron(&Matrix::identity(k, k), &f.a);
    let m1 = linalg::kron(&Matrix::identity(k, k), &proj) * sylv;
    let m2 = linalg::kron(&Matrix::identity(k, k), &f.c);
    let rows = m1.nrows() + m2.nrows();
    let mut m = Matrix::zeros(rows, n * k);
    m.rows_mut(0, m1.nrows()).copy_from(&m1);
    m.rows_mut(m1.nrows(), m2.nrows()).copy_from(&m2);
    let mut rhs = Vector::zeros(rows);
    rhs.rows_mut(m1.nrows(), m2.nrows())
        .copy_from(&linalg::vec_of(reference));
    let x = linalg::lstsq_min_norm(&m, &rhs, rel_tol);
    let pi = linalg::unvec(x.as_slice(), n, k);
    let gamma = b_pinv * (&pi * s_stack - &f.a * &pi);
    Ok((pi, gamma))
}

/// Real block-diagonal matrix with the given spectrum; a pair `a ± bj`
/// becomes `[[a, b], [−b, a]]`.
pub fn real_spectrum_matrix(poles: &[Complex64]) -> Result<Matrix> {
    let scale = poles.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let eps = 1e-9 * scale;
    let mut blocks = Vec::new();
    let mut used = vec![false; poles.len()];
    for k in 0..poles.len() {
        if used[k] {
            continue;
        }
        let p = poles[k];
        used[k] = true;
        if p.im.abs() <= eps {
            blocks.push(Matrix::from_element(1, 1, p.re));
            continue;
        }
        let partner = (0..poles.len())
            .find(|&j| !used[j] && (poles[j] - p.conj()).norm() <= eps)
            .ok_or_else(|| {
                Error::Synthesis(format!("pole {p} has no conjugate partner"))
            })?;
        used[partner] = true;
        let (a, b) = (p.re, p.im.abs());
        blocks.push(Matrix::from_row_slice(2, 2, &[a, b, -b, a]));
    }
    Ok(linalg::block_diag(&blocks))
}

/// Default desired poles `−1, −2, …, −N`.
pub fn default_poles(n: usize) -> Vec<Complex64> {
    (1..=n).map(|k| Complex64::new(-(k as f64), 0.0)).collect()
}

const PLACEMENT_ATTEMPTS: usize = 10;

/// Sylvester-method pole placement: `A X − X Λ = B G`, `K₁ = −G X⁻¹`, so
/// `A + B K₁ = X Λ X⁻¹`.
pub fn place_poles(
    a: &Matrix,
    b: &Matrix,
    poles: &[Complex64],
    seed: u64,
    tol: &ToleranceConfig,
) -> Result<Matrix> {
    let n = a.nrows();
    if poles.len() != n {
        return Err(Error::Synthesis(format!(
            "{} desired poles for a state of dimension {n}",
            poles.len()
        )));
    }
    if let Some(p) = poles.iter().find(|p| !(p.re < 0.0)) {
        return Err(Error::Synthesis(format!("desired pole {p} is not in the open left half-plane")));
    }
    let scale = poles
        .iter()
        .map(|p| p.norm())
        .chain(a.complex_eigenvalues().iter().map(|e| e.norm()))
        .fold(1.0, f64::max);
    let overlap = a
        .complex_eigenvalues()
        .iter()
        .any(|e| poles.iter().any(|p| (p - e).norm() < 1e-6 * scale));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if !overlap {
        return place_once(a, b, poles, &mut rng, tol);
    }
    // The Sylvester equation is singular when a desired pole is an open-loop
    // eigenvalue: first move the spectrum to a disjoint real set, then place.
    let staging: Vec<Complex64> = (0..n)
        .map(|k| Complex64::new(-(scale + 1.0 + k as f64), 0.0))
        .collect();
    let k0 = place_once(a, b, &staging, &mut rng, tol)?;
    let k1 = &k0 + place_once(&(a + b * &k0), b, poles, &mut rng, tol)?;
    let worst = pole_mismatch(&(a + b * &k1), poles);
    if worst < tol.pole {
        Ok(k1)
    } else {
        Err(Error::Synthesis(format!(
            "two-stage pole placement left characteristic polynomial residual {worst:e}"
        )))
    }
}

fn place_once(
    a: &Matrix,
    b: &Matrix,
    poles: &[Complex64],
    rng: &mut ChaCha8Rng,
    tol: &ToleranceConfig,
) -> Result<Matrix> {
    let n = a.nrows();
    let lam = real_spectrum_matrix(poles)?;
    let mut last = String::from("no attempt made");
    for _ in 0..PLACEMENT_ATTEMPTS {
        let g = Matrix::from_fn(b.ncols(), n, |_, _| rng.random_range(-1.0..1.0));
        let x = match solve_sylvester_with(a, &lam, &(b * &g), tol.sylvester_pivot) {
            Ok(x) => x,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        if linalg::condition_1(&x) > 1e12 {
            last = "ill-conditioned eigenvector matrix".into();
            continue;
        }
        let lu = Lu::factor(&x, PIVOT_TOL)?;
        let k1 = -(&g * lu.inverse());
        let worst = pole_mismatch(&(a + b * &k1), poles);
        if worst < tol.pole {
            return Ok(k1);
        }
        last = format!("characteristic polynomial residual {worst:e}");
    }
    Err(Error::Synthesis(format!(
        "pole placement failed after {PLACEMENT_ATTEMPTS} attempts ({last}); the pair may be uncontrollable"
    )))
}

/// Largest `|det(sI − M)|` over the desired poles.
pub fn pole_mismatch(m: &Matrix, poles: &[Complex64]) -> f64 {
    let cp = linalg::char_poly(m);
    poles
        .iter()
        .map(|&p| linalg::poly_eval(&cp, p).norm())
        .fold(0.0, f64::max)
}

/// `K₂ = Γ − K₁ Π`.
pub fn feedforward_gain(gamma: &Matrix, k1: &Matrix, pi: &Matrix) -> Result<Matrix> {
    if k1.ncols() != pi.nrows() || k1.nrows() != gamma.nrows() || pi.ncols() != gamma.ncols() {
        return Err(Error::dim(format!(
            "K₂ = Γ − K₁Π with Γ {:?}, K₁ {:?}, Π {:?}",
            gamma.shape(),
            k1.shape(),
            pi.shape()
        )));
    }
    Ok(gamma - k1 * pi)
}

/// Where a follower's feedback gain comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackSpec {
    Given(Matrix),
    Poles(Vec<Complex64>),
}

/// Per-follower gains and their checks.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub follower: AgentId,
    pub leaders: Vec<AgentId>,
    pub pi: Matrix,
    pub gamma: Matrix,
    pub k1: Matrix,
    pub k2: Matrix,
    pub residual_dynamics: f64,
    pub residual_output: f64,
    pub k1_given: bool,
    pub hurwitz: bool,
}

pub fn synthesize_follower(
    f: &FollowerModel,
    view: &LocalView,
    leaders: &[LeaderModel],
    n: usize,
    spec: &FeedbackSpec,
    seed: u64,
    tol: &ToleranceConfig,
) -> Result<GainSet> {
    let i = view.follower;
    if f.outputs() != leaders.first().map_or(0, LeaderModel::outputs) {
        return Err(Error::dim(format!(
            "follower {i} has {} outputs, leaders have {}",
            f.outputs(),
            leaders.first().map_or(0, LeaderModel::outputs)
        )));
    }
    let (s_stack, d_stack) = leader_stacks(view, leaders, n);
    let reg = solve_regulator(i, f, &s_stack, &d_stack, &view.phi, tol)?;
    let (k1, k1_given) = match spec {
        FeedbackSpec::Given(k) => {
            if k.shape() != (f.inputs(), f.states()) {
                return Err(Error::dim(format!(
                    "K₁ of follower {i} is {:?}, expected {:?}",
                    k.shape(),
                    (f.inputs(), f.states())
                )));
            }
            (k.clone(), true)
        }
        FeedbackSpec::Poles(p) => (
            place_poles(&f.a, &f.b, p, seed, tol).map_err(|e| {
                Error::Synthesis(format!("follower {i}: {e}"))
            })?,
            false,
        ),
    };
    let hurwitz = is_hurwitz(&(&f.a + &f.b * &k1));
    if !hurwitz {
        return Err(Error::AssumptionViolated {
            assumption: Assumption::Stabilizable,
            detail: format!("A + B K₁ of follower {i} is not Hurwitz"),
        });
    }
    let k2 = feedforward_gain(&reg.gamma, &k1, &reg.pi)?;
    Ok(GainSet {
        follower: i,
        leaders: view.leaders().to_vec(),
        pi: reg.pi,
        gamma: reg.gamma,
        k1,
        k2,
        residual_dynamics: reg.residual_dynamics,
        residual_output: reg.residual_output,
        k1_given,
        hurwitz,
    })
}

/// Per-follower seed derived from a base seed, independent of evaluation order.
pub fn follower_seed(seed: u64, i: AgentId) -> u64 {
    seed ^ (i.0 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn synthesize_gains(
    followers: &[FollowerModel],
    views: &[LocalView],
    leaders: &[LeaderModel],
    specs: &[FeedbackSpec],
    seed: u64,
    tol: &ToleranceConfig,
    exec: Exec,
) -> Result<Vec<GainSet>> {
    let n = followers.len();
    if views.len() != n || specs.len() != n {
        return Err(Error::dim("one view and one feedback spec per follower expected"));
    }
    exec.try_map_indexed(n, |t| {
        let i = AgentId(t + 1);
        synthesize_follower(&followers[t], &views[t], leaders, n, &specs[t], follower_seed(seed, i), tol)
    })
}

/// Closed-loop matrices in the coordinates `X_C = [x; η]`, input `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub a_c: Matrix,
    pub b_c: Matrix,
    pub c_c: Matrix,
    pub d_c: Matrix,
    pub x_bar: Matrix,
    /// Block-diagonal leader dynamics on `Ω`.
    pub s_omega: Matrix,
    /// `‖A_C X̄ + B_C − X̄ S̄̄‖_F`.
    pub residual_state: f64,
    /// `‖C_C X̄ + D_C‖_F`.
    pub residual_output: f64,
}

/// `(P ⊗ I_q) M (Pᵀ ⊗ I_q)` for a block permutation given as `to_leader_order`.
pub fn permute_blocks(m: &Matrix, to_leader_order: &[usize], q: usize) -> Matrix {
    let k = to_leader_order.len();
    Matrix::from_fn(k * q, k * q, |r, c| {
        let (br, u) = (r / q, r % q);
        let (bc, v) = (c / q, c % q);
        m[(to_leader_order[br] * q + u, to_leader_order[bc] * q + v)]
    })
}

/// Leader-order observer matrix `Θ = diag(I ⊗ S_λ − β^η (H_λ ⊗ I_q))`.
pub fn theta_leader_order(slices: &SliceSet, leaders: &[LeaderModel], n: usize, beta_eta: f64) -> Matrix {
    let blocks: Vec<Matrix> = slices
        .slices
        .iter()
        .map(|s| {
            let l = s.len();
            let lm = &leaders[s.leader.0 - n - 1];
            let q = lm.q();
            linalg::kron(&Matrix::identity(l, l), &lm.s)
                - linalg::kron(&s.h, &Matrix::identity(q, q)) * beta_eta
        })
        .collect();
    linalg::block_diag(&blocks)
}

/// Assembles the closed loop and checks the certificate
/// `A_C X̄ + B_C = X̄ S̄̄`, `C_C X̄ + D_C = 0` with `X̄ = [diag(Π_i); I]`.
///
/// The observer input matrix is `β^η (H ⊗ I_q)` with `H` the follower-order
/// pinning/coupling operator; on the manifold `Ω` this produces the same
/// trajectories as the pinning terms in the observer equations.
#[allow(clippy::too_many_arguments)]
pub fn assemble_closed_loop(
    followers: &[FollowerModel],
    gains: &[GainSet],
    views: &[LocalView],
    layout: &ObserverLayout,
    slices: &SliceSet,
    leaders: &[LeaderModel],
    observer_gains: &ObserverGains,
    tol: &ToleranceConfig,
) -> Result<ClosedLoop> {
    let n = followers.len();
    let q = layout.q();
    let qo = layout.outputs();
    let k = layout.num_blocks();
    if gains.len() != n || views.len() != n {
        return Err(Error::dim("one gain set and one view per follower expected"));
    }
    let nx: usize = followers.iter().map(FollowerModel::states).sum();
    let ne = k * q;
    let beta = observer_gains.beta_eta;

    let mut a_c = Matrix::zeros(nx + ne, nx + ne);
    let mut c_c = Matrix::zeros(n * qo, nx + ne);
    let mut d_c = Matrix::zeros(n * qo, ne);
    let mut x_bar = Matrix::zeros(nx + ne, ne);
    let mut s_blocks = Vec::with_capacity(k);
    let mut row = 0;
    for (t, f) in followers.iter().enumerate() {
        let i = AgentId(t + 1);
        let gs = &gains[t];
        let blocks = layout.blocks_of(i);
        let col = blocks.start * q;
        let width = blocks.len() * q;
        if gs.k2.ncols() != width || gs.pi.ncols() != width {
            return Err(Error::Assembly(format!(
                "gains of follower {i} do not match its {} observer blocks",
                blocks.len()
            )));
        }
        let ni = f.states();
        a_c.view_mut((row, row), (ni, ni))
            .copy_from(&(&f.a + &f.b * &gs.k1));
        a_c.view_mut((row, nx + col), (ni, width))
            .copy_from(&(&f.b * &gs.k2));
        c_c.view_mut((t * qo, row), (qo, ni)).copy_from(&f.c);
        let (s_stack, d_stack) = leader_stacks(&views[t], leaders, n);
        d_c.view_mut((t * qo, col), (qo, width))
            .copy_from(&(-reference_map(&views[t].phi, &d_stack, qo)?));
        x_bar.view_mut((row, col), (ni, width)).copy_from(&gs.pi);
        s_blocks.push(s_stack);
        row += ni;
    }
    let s_omega = linalg::block_diag(&s_blocks);
    let h_f = slices.h_follower_order();
    let coupling = linalg::kron(&h_f, &Matrix::identity(q, q)) * beta;
    a_c.view_mut((nx, nx), (ne, ne))
        .copy_from(&(&s_omega - &coupling));
    let mut b_c = Matrix::zeros(nx + ne, ne);
    b_c.view_mut((nx, 0), (ne, ne)).copy_from(&coupling);
    x_bar.view_mut((nx, 0), (ne, ne))
        .copy_from(&Matrix::identity(ne, ne));

    let residual_state = (&a_c * &x_bar + &b_c - &x_bar * &s_omega).norm();
    let residual_output = (&c_c * &x_bar + &d_c).norm();
    if !(residual_state <= tol.closed_loop && residual_output <= tol.closed_loop) {
        return Err(Error::Assembly(format!(
            "certificate residuals {residual_state:e} and {residual_output:e} exceed {:e}",
            tol.closed_loop
        )));
    }
    Ok(ClosedLoop {
        a_c,
        b_c,
        c_c,
        d_c,
        x_bar,
        s_omega,
        residual_state,
        residual_output,
    })
}

impl ClosedLoop {
    /// Observer block of `A_C`.
    pub fn observer_block(&self) -> Matrix {
        let ne = self.s_omega.nrows();
        let nx = self.a_c.nrows() - ne;
        self.a_c.view((nx, nx), (ne, ne)).into_owned()
    }

    pub fn plant_block(&self) -> Matrix {
        let ne = self.s_omega.nrows();
        let nx = self.a_c.nrows() - ne;
        self.a_c.view((0, 0), (nx, nx)).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;

    fn m(rows: &[&[f64]]) -> Matrix {
        from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn sylvester_small_cases() {
        let x = solve_sylvester(&m(&[&[2.0]]), &m(&[&[1.0]]), &m(&[&[3.0]])).unwrap();
        assert!((x[(0, 0)] - 3.0).abs() < 1e-15);
        let i2 = Matrix::identity(2, 2);
        let x = solve_sylvester(&i2, &(-&i2), &(&i2 * 2.0)).unwrap();
        assert!((x - &i2).norm() < 1e-15);
        assert!(matches!(
            solve_sylvester(&i2, &i2, &i2),
            Err(Error::SpectraOverlap)
        ));
    }

    #[test]
    fn hurwitz_examples() {
        assert!(is_hurwitz(&(-Matrix::identity(3, 3))));
        assert!(!is_hurwitz(&m(&[&[0.0, 1.0], &[-1.0, 0.0]])));
        assert!(!is_hurwitz(&Matrix::identity(2, 2)));
    }

    #[test]
    fn hurwitz_matches_trace_determinant_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut agree = 0;
        for _ in 0..1000 {
            let a = Matrix::from_fn(2, 2, |_, _| rng.random_range(-3.0..3.0));
            let analytic = a.trace() < 0.0 && a.determinant() > 0.0;
            if is_hurwitz(&a) == analytic {
                agree += 1;
            }
        }
        assert_eq!(agree, 1000);
    }

    #[test]
    fn static_regulator() {
        let f = FollowerModel::new(Matrix::zeros(2, 2), Matrix::identity(2, 2), Matrix::identity(2, 2)).unwrap();
        let r = solve_regulator(AgentId(1), &f, &Matrix::zeros(2, 2), &Matrix::identity(2, 2), &[1.0], &ToleranceConfig::default())
            .unwrap();
        assert_eq!(r.pi, Matrix::identity(2, 2));
        assert_eq!(r.gamma, Matrix::zeros(2, 2));
    }

    #[test]
    fn general_path_matches_direct_path() {
        let f = FollowerModel::new(
            m(&[&[-1.0, 0.0, 0.0], &[0.0, 3.0, 0.0], &[0.0, 3.0, 2.0]]),
            m(&[&[4.0, 1.0, 1.0], &[1.0, 4.0, 1.0], &[1.0, 1.0, 4.0]]),
            m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]),
        )
        .unwrap();
        let s = linalg::block_diag(&[m(&[&[1.0, -3.0], &[1.0, -1.0]]), m(&[&[1.0, -4.0], &[1.0, -1.0]])]);
        let d = Matrix::identity(4, 4);
        let tol = ToleranceConfig::default();
        let phi = [0.75, 0.25];
        let direct = solve_regulator(AgentId(1), &f, &s, &d, &phi, &tol).unwrap();
        let reference = reference_map(&phi, &d, 2).unwrap();
        let (pi, gamma) = regulator_general(&f, &s, &reference, tol.rank).unwrap();
        assert!((pi - &direct.pi).norm() < 1e-10);
        assert!((gamma - &direct.gamma).norm() < 1e-10);
    }

    #[test]
    fn underactuated_regulator() {
        // double integrator tracking a sinusoid through one input
        let f = FollowerModel::new(
            m(&[&[0.0, 1.0], &[0.0, 0.0]]),
            m(&[&[0.0], &[1.0]]),
            m(&[&[1.0, 0.0]]),
        )
        .unwrap();
        let s = m(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let d = m(&[&[1.0, 0.0]]);
        let r = solve_regulator(AgentId(1), &f, &s, &d, &[1.0], &ToleranceConfig::default()).unwrap();
        assert!(r.residual_dynamics < 1e-10 && r.residual_output < 1e-10);
        // the measured state is not actuated and stays constant
        let blocked = FollowerModel::new(
            m(&[&[0.0, 1.0], &[0.0, 0.0]]),
            m(&[&[1.0], &[0.0]]),
            m(&[&[0.0, 1.0]]),
        )
        .unwrap();
        assert!(matches!(
            solve_regulator(AgentId(2), &blocked, &s, &d, &[1.0], &ToleranceConfig::default()),
            Err(Error::RegulatorUnsolvable { .. })
        ));
    }

    #[test]
    fn scalar_pole_placement() {
        let k = place_poles(&m(&[&[0.0]]), &m(&[&[1.0]]), &[Complex64::new(-2.0, 0.0)], 1, &ToleranceConfig::default())
            .unwrap();
        assert!((k[(0, 0)] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn random_pole_placement() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tol = ToleranceConfig::default();
        for seed in 0..20 {
            let a = Matrix::from_fn(3, 3, |_, _| rng.random_range(-2.0..2.0));
            let b = Matrix::from_fn(3, 1, |_, _| rng.random_range(-2.0..2.0));
            let poles = default_poles(3);
            let k = place_poles(&a, &b, &poles, seed, &tol).unwrap();
            let cl = &a + &b * &k;
            assert!(pole_mismatch(&cl, &poles) < 1e-6);
            let coeffs = linalg::char_poly(&cl);
            let want = linalg::poly_from_roots(&poles);
            for (c, w) in coeffs.iter().zip(&want) {
                assert!((c - w).abs() <= 1e-6 * w.abs().max(1.0));
            }
            assert!(is_hurwitz(&cl));
        }
        // complex pair
        let a = m(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let b = m(&[&[0.0], &[1.0]]);
        let poles = [Complex64::new(-1.0, 2.0), Complex64::new(-1.0, -2.0)];
        let k = place_poles(&a, &b, &poles, 3, &tol).unwrap();
        assert!(pole_mismatch(&(&a + &b * &k), &poles) < 1e-9);
    }

    #[test]
    fn placement_with_pole_at_open_loop_eigenvalue() {
        let a = m(&[&[-1.0, 0.0, 0.0], &[0.0, 3.0, 0.0], &[0.0, 3.0, 2.0]]);
        let b = m(&[&[4.0, 1.0, 1.0], &[1.0, 4.0, 1.0], &[1.0, 1.0, 4.0]]);
        let poles = default_poles(3);
        let k = place_poles(&a, &b, &poles, 3, &ToleranceConfig::default()).unwrap();
        assert!(pole_mismatch(&(&a + &b * &k), &poles) < 1e-6);
        let a1 = m(&[&[-2.0]]);
        let k = place_poles(&a1, &m(&[&[1.0]]), &[Complex64::new(-2.0, 0.0)], 0, &ToleranceConfig::default()).unwrap();
        assert!(k[(0, 0)].abs() < 1e-9);
    }

    #[test]
    fn placement_rejects_bad_requests() {
        let tol = ToleranceConfig::default();
        let a = Matrix::identity(2, 2);
        let b = m(&[&[1.0], &[1.0]]);
        // uncontrollable: identical modes with a single input
        assert!(place_poles(&a, &b, &default_poles(2), 0, &tol).is_err());
        assert!(place_poles(&a, &b, &[Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)], 0, &tol).is_err());
        assert!(place_poles(&a, &b, &[Complex64::new(-1.0, 1.0), Complex64::new(-2.0, 0.0)], 0, &tol).is_err());
    }

    #[test]
    fn feedforward() {
        let z = feedforward_gain(&Matrix::zeros(2, 4), &Matrix::zeros(2, 2), &Matrix::zeros(2, 4)).unwrap();
        assert_eq!(z, Matrix::zeros(2, 4));
        assert!(feedforward_gain(&Matrix::zeros(2, 4), &Matrix::zeros(2, 3), &Matrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn stabilizability() {
        let a = m(&[&[-1.0, 0.0], &[0.0, 1.0]]);
        let f = FollowerModel::new(a.clone(), m(&[&[0.0], &[1.0]]), m(&[&[1.0, 0.0]])).unwrap();
        assert!(!f.is_controllable());
        assert!(f.is_stabilizable());
        let g = FollowerModel::new(a, m(&[&[1.0], &[0.0]]), m(&[&[1.0, 0.0]])).unwrap();
        assert!(!g.is_stabilizable());
    }
}
