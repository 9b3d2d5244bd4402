//! Fixed-step simulation of leaders, followers and observers, with
//! containment metrics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AgentId;
use crate::linalg::{Matrix, Vector};
use crate::local_view::LocalView;
use crate::observer::{
    estimation_errors, observer_rates, truth_blocks, EstimationError, LeaderModel, LeaderSnapshot,
    ObserverGains, ObserverLayout,
};
use crate::synth::{leader_stacks, FollowerModel, GainSet};

/// Step size, horizon and trace stride.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationConfig {
    pub h: f64,
    pub t_end: f64,
    pub record_every: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            h: 1e-3,
            t_end: 20.0,
            record_every: 10,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Scenario(format!("step h must be positive, got {}", self.h)));
        }
        if !(self.t_end > self.h) {
            return Err(Error::Scenario(format!(
                "horizon {} must exceed the step {}",
                self.t_end, self.h
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Scenario("record_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.h).round() as usize
    }
}

/// Abort threshold on any state magnitude.
pub const DIVERGENCE_BOUND: f64 = 1e9;

/// One classical Runge–Kutta step of `ẏ = f(t, y)`; `work` holds five
/// scratch vectors of the state length.
pub fn rk4_step<F>(f: &mut F, t: f64, y: &mut [f64], h: f64, work: &mut [Vec<f64>; 5])
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let [k1, k2, k3, k4, tmp] = work;
    f(t, y, k1);
    for j in 0..n {
        tmp[j] = y[j] + 0.5 * h * k1[j];
    }
    f(t + 0.5 * h, tmp, k2);
    for j in 0..n {
        tmp[j] = y[j] + 0.5 * h * k2[j];
    }
    f(t + 0.5 * h, tmp, k3);
    for j in 0..n {
        tmp[j] = y[j] + h * k3[j];
    }
    f(t + h, tmp, k4);
    for j in 0..n {
        y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
}

pub fn rk4_workspace(n: usize) -> [Vec<f64>; 5] {
    std::array::from_fn(|_| vec![0.0; n])
}

/// Integrates `steps` fixed steps from `y`, calling `record(k, t, y)` at
/// every `record_every`-th step including the first and last.
pub fn rk4_integrate<F, R>(
    mut f: F,
    y: &mut [f64],
    h: f64,
    steps: usize,
    record_every: usize,
    mut record: R,
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    R: FnMut(usize, f64, &[f64]),
{
    let mut work = rk4_workspace(y.len());
    record(0, 0.0, y);
    for k in 1..=steps {
        let t = (k - 1) as f64 * h;
        rk4_step(&mut f, t, y, h, &mut work);
        let t = k as f64 * h;
        if let Some(v) = y.iter().find(|v| !(v.abs() <= DIVERGENCE_BOUND)) {
            return Err(Error::Divergence {
                time: t,
                detail: format!("state component reached {v}"),
            });
        }
        if k % record_every == 0 || k == steps {
            record(k, t, y);
        }
    }
    Ok(())
}

/// `y − (Φ ⊗ I_Q) D̄̄ Ω`.
pub fn containment_error(y: &[f64], phi: &[f64], d_stack: &Matrix, omega_stack: &[f64]) -> Vector {
    let qo = y.len();
    let target = d_stack * Vector::from_column_slice(omega_stack);
    let mut e = Vector::from_column_slice(y);
    for (k, &p) in phi.iter().enumerate() {
        for r in 0..qo {
            e[r] -= p * target[k * qo + r];
        }
    }
    e
}

/// Distance to a convex hull with its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct HullDistance {
    pub distance: f64,
    pub weights: Vec<f64>,
    /// Frank–Wolfe duality gap on `½‖Σ α_k p_k − y‖²` at the returned weights.
    pub gap: f64,
    /// Major (vertex-adding) iterations.
    pub iterations: usize,
}

pub const HULL_GAP_TOL: f64 = 1e-8;
pub const HULL_MAX_ITER: usize = 10_000;

/// Minimizer of `‖Σ μ_k z_k‖` over the affine hull of `z_k, k ∈ active`.
fn affine_minimizer(z: &[Vector], active: &[usize]) -> Option<Vec<f64>> {
    let k = active.len();
    let mut m = Matrix::zeros(k + 1, k + 1);
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            m[(a, b)] = z[i].dot(&z[j]);
        }
        m[(a, k)] = 1.0;
        m[(k, a)] = 1.0;
    }
    let mut rhs = Vector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = match m.clone().full_piv_lu().solve(&rhs) {
        Some(sol) if (&m * &sol - &rhs).amax() <= 1e-12 => sol,
        _ => crate::linalg::lstsq_min_norm(&m, &rhs, 1e-12),
    };
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some(sol.iter().take(k).copied().collect())
}

/// Euclidean distance from `y` to the convex hull of `points`.
///
/// Fully corrective Frank–Wolfe (Wolfe's minimum-norm-point method): each
/// major step adds the vertex minimizing the linearized objective, and the
/// minor steps re-optimize exactly over the active vertices. Stops when the
/// duality gap is at most `1e-8` and the distance bracket
/// `[√(d² − 2·gap), d]` is narrower than `1e-8`, or when no vertex improves
/// the objective.
pub fn hull_distance(y: &[f64], points: &[Vector]) -> HullDistance {
    let m = points.len();
    assert!(m >= 1, "hull of an empty point set");
    let yv = Vector::from_column_slice(y);
    let z: Vec<Vector> = points.iter().map(|p| p - &yv).collect();
    let start = (0..m)
        .min_by(|&a, &b| z[a].norm().total_cmp(&z[b].norm()))
        .expect("non-empty");
    let mut active = vec![start];
    let mut lambda = vec![1.0];
    let mut x = z[start].clone();
    let mut gap;
    let mut iterations = 0;
    let combine = |active: &[usize], lambda: &[f64]| {
        let mut x = Vector::zeros(y.len());
        for (&i, &l) in active.iter().zip(lambda) {
            x += l * &z[i];
        }
        x
    };
    loop {
        let xx = x.norm_squared();
        let j = (0..m)
            .min_by(|&a, &b| z[a].dot(&x).total_cmp(&z[b].dot(&x)))
            .expect("non-empty");
        gap = (xx - z[j].dot(&x)).max(0.0);
        let d = xx.sqrt();
        let lower = (xx - 2.0 * gap).max(0.0).sqrt();
        if (gap <= HULL_GAP_TOL && d - lower <= HULL_GAP_TOL)
            || active.contains(&j)
            || iterations >= HULL_MAX_ITER
        {
            break;
        }
        iterations += 1;
        active.push(j);
        lambda.push(0.0);
        let before = xx;
        while let Some(mu) = affine_minimizer(&z, &active) {
            if mu.iter().all(|&v| v > 0.0) {
                lambda = mu;
                break;
            }
            // move toward the affine minimizer until a weight hits zero
            let mut theta = 1.0f64;
            for (&l, &u) in lambda.iter().zip(&mu) {
                if u <= 0.0 && l - u > 0.0 {
                    theta = theta.min(l / (l - u));
                }
            }
            for (l, u) in lambda.iter_mut().zip(&mu) {
                *l += theta * (u - *l);
            }
            let mut k = 0;
            while k < active.len() {
                if lambda[k] <= 1e-15 {
                    active.swap_remove(k);
                    lambda.swap_remove(k);
                } else {
                    k += 1;
                }
            }
            if active.len() == 1 {
                lambda = vec![1.0];
                break;
            }
        }
        let total: f64 = lambda.iter().sum();
        for l in &mut lambda {
            *l /= total;
        }
        x = combine(&active, &lambda);
        if x.norm_squared() >= before {
            break;
        }
    }
    let mut weights = vec![0.0; m];
    for (&i, &l) in active.iter().zip(&lambda) {
        weights[i] = l;
    }
    HullDistance {
        distance: x.norm(),
        weights,
        gap,
        iterations,
    }
}

/// Closed-loop right-hand side over the flat state `[ω | x | observer]`.
#[derive(Debug, Clone)]
pub struct ClosedLoopSystem<'a> {
    followers: &'a [FollowerModel],
    k1: Vec<Matrix>,
    k2: Vec<Matrix>,
    layout: &'a ObserverLayout,
    leaders: &'a [LeaderModel],
    truth: Vec<Vec<f64>>,
    observer_gains: ObserverGains,
    x_offsets: Vec<usize>,
    nx: usize,
}

impl<'a> ClosedLoopSystem<'a> {
    pub fn new(
        followers: &'a [FollowerModel],
        gains: &[GainSet],
        layout: &'a ObserverLayout,
        leaders: &'a [LeaderModel],
        observer_gains: ObserverGains,
    ) -> Result<Self> {
        if gains.len() != followers.len() || layout.num_followers() != followers.len() {
            return Err(Error::dim("followers, gains and observer layout disagree"));
        }
        let mut x_offsets = Vec::with_capacity(followers.len());
        let mut nx = 0;
        for f in followers {
            x_offsets.push(nx);
            nx += f.states();
        }
        Ok(Self {
            followers,
            k1: gains.iter().map(|g| g.k1.clone()).collect(),
            k2: gains.iter().map(|g| g.k2.clone()).collect(),
            layout,
            leaders,
            truth: truth_blocks(leaders),
            observer_gains,
            x_offsets,
            nx,
        })
    }

    pub fn n(&self) -> usize {
        self.followers.len()
    }

    pub fn m(&self) -> usize {
        self.leaders.len()
    }

    pub fn q(&self) -> usize {
        self.layout.q()
    }

    pub fn omega_range(&self) -> std::ops::Range<usize> {
        0..self.m() * self.q()
    }

    pub fn x_range(&self, t: usize) -> std::ops::Range<usize> {
        let o = self.m() * self.q() + self.x_offsets[t];
        o..o + self.followers[t].states()
    }

    pub fn observer_range(&self) -> std::ops::Range<usize> {
        let o = self.m() * self.q() + self.nx;
        o..o + self.layout.len()
    }

    pub fn dim(&self) -> usize {
        self.observer_range().end
    }

    /// Stacked `η_i` of follower index `t`.
    pub fn eta_of(&self, obs: &[f64], t: usize) -> Vector {
        let q = self.q();
        let len = self.layout.block_len();
        let blocks = self.layout.blocks_of(AgentId(t + 1));
        let mut out = Vector::zeros(blocks.len() * q);
        for (k, b) in blocks.enumerate() {
            out.rows_mut(k * q, q)
                .copy_from_slice(&obs[b * len..b * len + q]);
        }
        out
    }

    pub fn snapshot<'s>(&'s self, y: &'s [f64]) -> LeaderSnapshot<'s> {
        LeaderSnapshot {
            n: self.n(),
            models: self.leaders,
            truth: &self.truth,
            omega: &y[self.omega_range()],
        }
    }

    pub fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let q = self.q();
        for (li, lm) in self.leaders.iter().enumerate() {
            let w = Vector::from_column_slice(&y[li * q..(li + 1) * q]);
            dy[li * q..(li + 1) * q].copy_from_slice((&lm.s * w).as_slice());
        }
        let obs = &y[self.observer_range()];
        for (t, f) in self.followers.iter().enumerate() {
            let r = self.x_range(t);
            let x = Vector::from_column_slice(&y[r.clone()]);
            let u = &self.k1[t] * &x + &self.k2[t] * self.eta_of(obs, t);
            let dx = &f.a * x + &f.b * u;
            dy[r].copy_from_slice(dx.as_slice());
        }
        let snap = self.snapshot(y);
        let range = self.observer_range();
        let (_, tail) = dy.split_at_mut(range.start);
        observer_rates(self.layout, obs, &snap, &self.observer_gains, tail);
    }
}

/// One recorded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    pub leader_y: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub dist: Vec<f64>,
    pub estimation: Vec<EstimationError>,
}

impl Sample {
    pub fn e_norm(&self, t: usize) -> f64 {
        self.e[t].iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Time-indexed record of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub follower_states: Vec<usize>,
    pub outputs: usize,
    pub q: usize,
    pub samples: Vec<Sample>,
}

impl Trace {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trace has at least one sample")
    }

    pub fn sample_at(&self, t: f64) -> &Sample {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("trace has at least one sample")
    }

    pub fn num_followers(&self) -> usize {
        self.follower_states.len()
    }

    pub fn num_leaders(&self) -> usize {
        self.samples.first().map_or(0, |s| s.omega.len())
    }
}

/// Assembles the initial flat state from per-agent pieces.
pub fn initial_state(
    sys: &ClosedLoopSystem<'_>,
    omega0: &[Vector],
    x0: &[Vector],
    observer0: &[f64],
) -> Result<Vec<f64>> {
    let q = sys.q();
    let mut y = vec![0.0; sys.dim()];
    if omega0.len() != sys.m() || x0.len() != sys.n() || observer0.len() != sys.layout.len() {
        return Err(Error::dim("initial condition counts do not match the scenario"));
    }
    for (li, w) in omega0.iter().enumerate() {
        if w.len() != q {
            return Err(Error::dim(format!("leader initial state {} has length {}", li, w.len())));
        }
        y[li * q..(li + 1) * q].copy_from_slice(w.as_slice());
    }
    for (t, x) in x0.iter().enumerate() {
        let r = sys.x_range(t);
        if x.len() != r.len() {
            return Err(Error::dim(format!(
                "follower {} initial state has length {}, expected {}",
                t + 1,
                x.len(),
                r.len()
            )));
        }
        y[r].copy_from_slice(x.as_slice());
    }
    let r = sys.observer_range();
    y[r].copy_from_slice(observer0);
    Ok(y)
}

/// Derived quantities at one state.
pub fn make_sample(sys: &ClosedLoopSystem<'_>, views: &[LocalView], t: f64, y: &[f64]) -> Sample {
    let q = sys.q();
    let omega: Vec<Vec<f64>> = (0..sys.m()).map(|li| y[li * q..(li + 1) * q].to_vec()).collect();
    let leader_y: Vec<Vector> = sys
        .leaders
        .iter()
        .zip(&omega)
        .map(|(lm, w)| &lm.d * Vector::from_column_slice(w))
        .collect();
    let mut xs = Vec::with_capacity(sys.n());
    let mut ys = Vec::with_capacity(sys.n());
    let mut es = Vec::with_capacity(sys.n());
    let mut dist = Vec::with_capacity(sys.n());
    for (t_idx, f) in sys.followers.iter().enumerate() {
        let x = &y[sys.x_range(t_idx)];
        let yi = &f.c * Vector::from_column_slice(x);
        let view = &views[t_idx];
        let (_, d_stack) = leader_stacks(view, sys.leaders, sys.n());
        let omega_stack: Vec<f64> = view
            .mu_bar
            .iter()
            .flat_map(|l| omega[l.0 - sys.n() - 1].iter().copied())
            .collect();
        let e = containment_error(yi.as_slice(), &view.phi, &d_stack, &omega_stack);
        dist.push(hull_distance(yi.as_slice(), &leader_y).distance);
        xs.push(x.to_vec());
        ys.push(yi.as_slice().to_vec());
        es.push(e.as_slice().to_vec());
    }
    let snap = sys.snapshot(y);
    let estimation = estimation_errors(sys.layout, &y[sys.observer_range()], &snap);
    Sample {
        t,
        state: y.to_vec(),
        x: xs,
        y: ys,
        omega,
        leader_y: leader_y.iter().map(|v| v.as_slice().to_vec()).collect(),
        e: es,
        dist,
        estimation,
    }
}

/// Runs the closed loop from `y0` and records a trace.
pub fn integrate(
    sys: &ClosedLoopSystem<'_>,
    views: &[LocalView],
    y0: Vec<f64>,
    cfg: &IntegrationConfig,
) -> Result<Trace> {
    cfg.validate()?;
    if y0.len() != sys.dim() {
        return Err(Error::dim(format!(
            "initial state has length {}, system needs {}",
            y0.len(),
            sys.dim()
        )));
    }
    let mut y = y0;
    let mut samples = Vec::with_capacity(cfg.steps() / cfg.record_every + 2);
    rk4_integrate(
        |_, s, d| sys.rhs(s, d),
        &mut y,
        cfg.h,
        cfg.steps(),
        cfg.record_every,
        |_, t, s| samples.push(make_sample(sys, views, t, s)),
    )?;
    Ok(Trace {
        follower_states: sys.followers.iter().map(FollowerModel::states).collect(),
        outputs: sys.leaders.first().map_or(0, LeaderModel::outputs),
        q: sys.q(),
        samples,
    })
}

/// Every follower's hull distance stays within `tol` for all samples at or
/// after `t_from`.
pub fn containment_achieved(trace: &Trace, t_from: f64, tol: f64) -> bool {
    let mut any = false;
    for s in trace.samples.iter().filter(|s| s.t >= t_from - 1e-12) {
        any = true;
        if s.dist.iter().any(|&d| !(d <= tol)) {
            return false;
        }
    }
    any
}

/// CSV column names in output order.
pub fn csv_header(trace: &Trace) -> Vec<String> {
    let n = trace.num_followers();
    let mut cols = vec!["t".to_string()];
    for i in 1..=n {
        for j in 1..=trace.follower_states[i - 1] {
            cols.push(format!("x{i}_{j}"));
        }
    }
    for i in 1..=n {
        for j in 1..=trace.outputs {
            cols.push(format!("y{i}_{j}"));
        }
    }
    for k in n + 1..=n + trace.num_leaders() {
        for j in 1..=trace.q {
            cols.push(format!("w{k}_{j}"));
        }
    }
    for k in n + 1..=n + trace.num_leaders() {
        for j in 1..=trace.outputs {
            cols.push(format!("yl{k}_{j}"));
        }
    }
    for i in 1..=n {
        for j in 1..=trace.outputs {
            cols.push(format!("e{i}_{j}"));
        }
    }
    for i in 1..=n {
        cols.push(format!("dist{i}"));
    }
    for i in 1..=n {
        cols.push(format!("err_eta_{i}"));
        cols.push(format!("err_S_{i}"));
        cols.push(format!("err_D_{i}"));
    }
    cols
}

pub fn write_csv<W: Write>(trace: &Trace, mut w: W) -> Result<()> {
    writeln!(w, "{}", csv_header(trace).join(","))?;
    for s in &trace.samples {
        let mut row: Vec<f64> = vec![s.t];
        row.extend(s.x.iter().flatten());
        row.extend(s.y.iter().flatten());
        row.extend(s.omega.iter().flatten());
        row.extend(s.leader_y.iter().flatten());
        row.extend(s.e.iter().flatten());
        row.extend(&s.dist);
        for e in &s.estimation {
            row.extend([e.eta, e.s, e.d]);
        }
        let text: Vec<String> = row.iter().map(|v| format!("{v:.10e}")).collect();
        writeln!(w, "{}", text.join(","))?;
    }
    Ok(())
}

/// Gnuplot script drawing observer errors, outputs against leader outputs,
/// and containment errors from `trace.csv`.
pub fn gnuplot_script(trace: &Trace) -> String {
    let header = csv_header(trace);
    let col = |name: &str| header.iter().position(|c| c == name).map(|p| p + 1);
    let n = trace.num_followers();
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset key outside\nset xlabel 't'\n");
    s.push_str("set terminal pngcairo size 1000,700\n");
    let mut plot = |file: &str, title: &str, series: Vec<(usize, String)>| {
        s.push_str(&format!("set output '{file}'\nset title '{title}'\nplot "));
        let parts: Vec<String> = series
            .into_iter()
            .map(|(c, label)| format!("'trace.csv' using 1:{c} with lines title '{label}'"))
            .collect();
        s.push_str(&parts.join(", \\\n     "));
        s.push('\n');
    };
    let mut est = Vec::new();
    for i in 1..=n {
        for kind in ["eta", "S", "D"] {
            let name = format!("err_{kind}_{i}");
            if let Some(c) = col(&name) {
                est.push((c, name));
            }
        }
    }
    plot("estimation_errors.png", "observer estimation errors", est);
    for j in 1..=trace.outputs {
        let mut series = Vec::new();
        for i in 1..=n {
            if let Some(c) = col(&format!("y{i}_{j}")) {
                series.push((c, format!("follower {i}")));
            }
        }
        for k in n + 1..=n + trace.num_leaders() {
            if let Some(c) = col(&format!("yl{k}_{j}")) {
                series.push((c, format!("leader {k}")));
            }
        }
        plot(&format!("outputs_{j}.png"), &format!("output component {j}"), series);
    }
    let mut errs = Vec::new();
    for i in 1..=n {
        for j in 1..=trace.outputs {
            let name = format!("e{i}_{j}");
            if let Some(c) = col(&name) {
                errs.push((c, name));
            }
        }
    }
    plot("containment_errors.png", "containment errors", errs);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn rk4_order() {
        // ẏ = −y + sin t
        let exact = |t: f64| 1.5 * (-t).exp() + 0.5 * (t.sin() - t.cos());
        let run = |h: f64| {
            let mut y = [1.0];
            let steps = (2.0 / h).round() as usize;
            rk4_integrate(|t, y, d| d[0] = -y[0] + t.sin(), &mut y, h, steps, steps, |_, _, _| {})
                .unwrap();
            (y[0] - exact(2.0)).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!(ratio >= 8.0, "ratio {ratio}");
    }

    #[test]
    fn divergence_is_reported() {
        let mut y = [1.0];
        let r = rk4_integrate(|_, y, d| d[0] = 10.0 * y[0], &mut y, 0.1, 1000, 1, |_, _, _| {});
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }

    #[test]
    fn hull_examples() {
        let tri = [v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        assert!(hull_distance(&[0.2, 0.3], &tri).distance <= 1e-8);
        assert!((hull_distance(&[2.0, 0.0], &tri).distance - 1.0).abs() < 1e-9);
        assert!((hull_distance(&[3.0, 4.0], &[v(&[0.0, 0.0])]).distance - 5.0).abs() < 1e-15);
        // nearest point on an edge
        let d = hull_distance(&[1.0, 1.0], &tri);
        assert!((d.distance - 0.5f64.sqrt()).abs() < 1e-9);
        assert!((d.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn containment_error_cases() {
        let d = Matrix::identity(2, 2);
        let e = containment_error(&[1.0, 2.0], &[1.0], &d, &[1.0, 2.0]);
        assert_eq!(e.norm(), 0.0);
        let e = containment_error(&[3.0, 2.0], &[1.0], &d, &[1.0, 0.0]);
        assert_eq!(e.as_slice(), &[2.0, 2.0]);
        let d2 = Matrix::identity(4, 4);
        let e = containment_error(&[2.0, -1.0], &[0.75, 0.25], &d2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(e.as_slice(), &[2.0 - 0.75, -1.0 - 0.25]);
    }
}
