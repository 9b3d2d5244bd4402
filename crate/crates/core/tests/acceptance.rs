//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use containsim::discovery::run_discovery;
use containsim::graph::{random_led_dag, Graph};
use containsim::local_view::{build_local_view, build_local_views};
use containsim::pipeline::{self, RunOutcome, Stage};
use containsim::scenario::{parse_k1_file, Scenario};
use containsim::sim::{self, hull_distance, ClosedLoopSystem};
use containsim::synth::{
    feedforward_gain, is_hurwitz, leader_stacks, solve_regulator, solve_sylvester, GainSet,
};
use containsim::{AgentId, Exec};

type M = DMatrix<f64>;

fn mat(rows: &[&[f64]]) -> M {
    let r = rows.len();
    let c = rows[0].len();
    M::from_fn(r, c, |i, j| rows[i][j])
}

struct Verdict {
    ok: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(f: impl FnOnce() -> (bool, String)) -> Verdict {
    let t0 = Instant::now();
    let (ok, detail) = f();
    Verdict {
        ok,
        detail,
        elapsed: t0.elapsed(),
    }
}

fn max_abs_diff(a: &M, b: &M) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- oracles

/// Followers with a directed path to `i`, by breadth-first search over
/// in-edges.
fn upstream_followers(g: &Graph, i: AgentId) -> BTreeSet<AgentId> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([i]);
    while let Some(t) = queue.pop_front() {
        for e in g.edges().filter(|e| e.to == t && e.from.0 <= g.n()) {
            if e.from != i && seen.insert(e.from) {
                queue.push_back(e.from);
            }
        }
    }
    seen
}

/// Global influence matrix `−L₁⁻¹L₂` from the raw edge list.
fn oracle_phi(g: &Graph) -> M {
    let (n, m) = (g.n(), g.m());
    let mut l1 = M::zeros(n, n);
    let mut l2 = M::zeros(n, m);
    for e in g.edges() {
        let to = e.to.0 - 1;
        l1[(to, to)] += e.weight;
        if e.from.0 <= n {
            l1[(to, e.from.0 - 1)] -= e.weight;
        } else {
            l2[(to, e.from.0 - n - 1)] -= e.weight;
        }
    }
    -l1.full_piv_lu().solve(&l2).expect("L1 invertible")
}

/// Longest follower-to-follower path (edge count) by dynamic programming
/// over repeated relaxation.
fn longest_follower_path(g: &Graph) -> usize {
    let n = g.n();
    let mut len = vec![0usize; n + 1];
    for _ in 0..n {
        for e in g.edges().filter(|e| e.from.0 <= n) {
            len[e.to.0] = len[e.to.0].max(len[e.from.0] + 1);
        }
    }
    len.into_iter().max().unwrap_or(0)
}

/// Exact distance from `y` to the convex hull of planar points.
fn oracle_hull_distance_2d(y: [f64; 2], pts: &[[f64; 2]]) -> f64 {
    let seg = |a: [f64; 2], b: [f64; 2]| {
        let d = [b[0] - a[0], b[1] - a[1]];
        let dd = d[0] * d[0] + d[1] * d[1];
        let t = if dd == 0.0 {
            0.0
        } else {
            (((y[0] - a[0]) * d[0] + (y[1] - a[1]) * d[1]) / dd).clamp(0.0, 1.0)
        };
        ((y[0] - a[0] - t * d[0]).powi(2) + (y[1] - a[1] - t * d[1]).powi(2)).sqrt()
    };
    let mut best = f64::INFINITY;
    for a in pts {
        for b in pts {
            best = best.min(seg(*a, *b));
        }
    }
    // monotone-chain hull, counter-clockwise
    let mut p: Vec<[f64; 2]> = pts.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    if hull.len() >= 3 {
        let inside = (0..hull.len()).all(|k| cross(hull[k], hull[(k + 1) % hull.len()], y) >= 0.0);
        if inside {
            return 0.0;
        }
    }
    best
}

// ---------------------------------------------------------------- fixtures

struct ExampleRun {
    scenario: Scenario,
    outcome: RunOutcome,
}

fn run_example(s: Scenario) -> ExampleRun {
    let outcome = pipeline::run(&s, None, Stage::Simulate, Exec::default()).expect("example runs");
    ExampleRun {
        scenario: s,
        outcome,
    }
}

// ---------------------------------------------------------------- criteria

fn criterion_1() -> (bool, String) {
    let s = Scenario::example();
    let d = run_discovery(&s.graph, Exec::default()).unwrap();
    let v1 = build_local_view(AgentId(1), &d).unwrap();
    let e1 = max_abs_diff(&v1.l1_local, &mat(&[&[2.0, -1.0], &[0.0, 2.0]]));
    let e2 = max_abs_diff(&v1.l2_local, &mat(&[&[-1.0, 0.0], &[-1.0, -1.0]]));
    let eu = (v1.upsilon[0] - 1.0).abs() + v1.upsilon[1].abs();
    let ep = (v1.phi[0] - 0.75).abs().max((v1.phi[1] - 0.25).abs());
    let views = build_local_views(&d, Exec::default()).unwrap();
    let sums: Vec<f64> = views.iter().map(|v| v.phi.iter().sum()).collect();
    let worst_sum = sums.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    let ok = e1 <= 1e-12 && e2 <= 1e-12 && eu <= 1e-12 && ep <= 1e-12 && worst_sum <= 1e-12;
    (
        ok,
        format!("L1 err {e1:.1e}, L2 err {e2:.1e}, Υ err {eu:.1e}, Φ err {ep:.1e}, row sums {sums:?}"),
    )
}

fn reference_regulators() -> Vec<(M, M)> {
    vec![
        (
            mat(&[&[0.75, 0.0, 0.25, 0.0], &[0.0, 0.75, 0.0, 0.25]]),
            mat(&[&[0.0, 1.25, 0.0, 0.583], &[0.0, -1.0, 0.0, -0.416]]),
        ),
        (
            mat(&[&[0.5, 0.0, 0.5, 0.0], &[0.0, 0.5, 0.0, 0.5]]),
            mat(&[&[0.16, 0.5, 0.16, 0.33], &[0.16, 0.5, 0.16, 0.83]]),
        ),
        (
            mat(&[
                &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                &[0.416, 0.0, 0.25, 0.0, 0.33, 0.0],
                &[0.0, 0.416, 0.0, 0.25, 0.0, 0.33],
            ]),
            mat(&[
                &[0.09, 0.13, 0.05, 0.09, 0.073, 0.14],
                &[-0.18, -0.27, -0.11, -0.23, -0.146, -0.40],
                &[-0.18, -0.27, -0.11, -0.15, -0.146, -0.18],
            ]),
        ),
        (
            mat(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]),
            mat(&[&[0.0, 0.0], &[-1.0, -4.0], &[-2.0, -8.0]]),
        ),
    ]
}

fn criterion_2() -> (bool, String) {
    let s = Scenario::example();
    let d = run_discovery(&s.graph, Exec::default()).unwrap();
    let views = build_local_views(&d, Exec::default()).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for (t, ((f, v), (pi_ref, gamma_ref))) in
        s.followers.iter().zip(&views).zip(reference_regulators()).enumerate()
    {
        let (s_stack, d_stack) = leader_stacks(v, &s.leaders, s.n());
        let sol = solve_regulator(v.follower, f, &s_stack, &d_stack, &v.phi, &s.tolerances).unwrap();
        // residuals recomputed here from the definitions
        let phi_row = M::from_row_slice(1, v.phi.len(), &v.phi);
        let r = phi_row.kronecker(&M::identity(2, 2)) * &d_stack;
        let res_dyn = (&sol.pi * &s_stack - &f.a * &sol.pi - &f.b * &sol.gamma).norm();
        let res_out = (&f.c * &sol.pi - r).norm();
        let dp = max_abs_diff(&sol.pi, &pi_ref);
        let dg = max_abs_diff(&sol.gamma, &gamma_ref);
        let mut off = Vec::new();
        for (name, got, want) in [("Π", &sol.pi, &pi_ref), ("Γ", &sol.gamma, &gamma_ref)] {
            for ((i, j), w) in want.iter().enumerate().map(|(k, w)| ((k % want.nrows(), k / want.nrows()), w)) {
                let g = got[(i, j)];
                if (g - w).abs() > 2e-3 {
                    off.push(format!("{name}[{},{}] {g:.4} vs {w}", i + 1, j + 1));
                }
            }
        }
        let this = dp <= 2e-3 && dg <= 2e-3 && res_dyn <= 1e-9 && res_out <= 1e-9;
        ok &= this;
        notes.push(format!(
            "f{}: |ΔΠ| {dp:.1e} |ΔΓ| {dg:.1e} res {res_dyn:.1e}/{res_out:.1e}{}",
            t + 1,
            if off.is_empty() {
                String::new()
            } else {
                format!(" [{}]", off.join("; "))
            }
        ));
    }
    (ok, notes.join(" | "))
}

fn reference_k2() -> Vec<M> {
    vec![
        mat(&[&[-3.25, 0.5, -1.08, 0.33], &[2.0, 1.25, 0.66, 0.33]]),
        mat(&[&[0.66, -1.83, 0.66, -2.0], &[-1.83, 1.66, -1.83, 2.0]]),
        mat(&[
            &[-0.16, -0.02, -0.09, 0.00, -0.12, 0.01],
            &[0.67, -0.43, 0.40, -0.33, 0.53, -0.53],
            &[-0.02, 0.53, -0.01, 0.33, -0.01, 0.45],
        ]),
        mat(&[&[0.0, 0.0], &[6.0, -5.0], &[1.0, 4.0]]),
    ]
}

fn criterion_3() -> (bool, String) {
    let mut s = Scenario::example();
    let k1_text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../scenarios/example_k1.json"
    ))
    .unwrap();
    s.set_k1(&parse_k1_file(&k1_text).unwrap()).unwrap();
    let d = run_discovery(&s.graph, Exec::default()).unwrap();
    let views = build_local_views(&d, Exec::default()).unwrap();
    let syn = pipeline::synthesize(&s, &d, &views, Exec::default()).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for (t, (g, k2_ref)) in syn.gains.iter().zip(reference_k2()).enumerate() {
        let f = &s.followers[t];
        let k2 = feedforward_gain(&g.gamma, &g.k1, &g.pi).unwrap();
        let dk = max_abs_diff(&k2, &k2_ref);
        let closed = &f.a + &f.b * &g.k1;
        let hurwitz = is_hurwitz(&closed);
        let spectral = closed.complex_eigenvalues().iter().all(|e| e.re < 0.0);
        ok &= dk <= 2e-2 && hurwitz && spectral && g.k1_given;
        notes.push(format!("f{}: |ΔK²| {dk:.1e} hurwitz {hurwitz}/{spectral}", t + 1));
    }
    (ok, notes.join(" | "))
}

fn criterion_4_and_5() -> ((bool, String), (bool, String)) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut ok4, mut ok5) = (true, true);
    let (mut worst_phi, mut max_rounds_slack) = (0.0f64, i64::MIN);
    let mut graphs = 0;
    while graphs < 200 {
        let n = rng.random_range(1..=12);
        let m = rng.random_range(1..=4);
        let p = rng.random_range(0.1..0.6);
        let g = random_led_dag(&mut rng, n, m, p);
        // every follower reachable from some leader
        let led = g.followers().all(|i| {
            upstream_followers(&g, i)
                .iter()
                .chain(std::iter::once(&i))
                .any(|&t| g.edges().any(|e| e.to == t && e.from.0 > n))
        });
        if !led {
            continue;
        }
        graphs += 1;
        let d = run_discovery(&g, Exec::default()).unwrap();
        for i in g.followers() {
            let mut sources = upstream_followers(&g, i);
            sources.insert(i);
            let mut leaders = BTreeSet::new();
            let mut followers = BTreeSet::new();
            let mut edges = BTreeMap::new();
            for e in g.edges().filter(|e| sources.contains(&e.to)) {
                if e.from.0 > n {
                    leaders.insert(e.from);
                } else {
                    followers.insert(e.from);
                }
                edges.insert((e.to, e.from), e.weight);
            }
            followers.extend(sources.iter().copied());
            let got = d.get(i);
            if got.leaders != leaders || got.followers != followers || got.edges != edges {
                ok4 = false;
            }
        }
        let longest = longest_follower_path(&g);
        max_rounds_slack = max_rounds_slack.max(d.content_rounds as i64 - longest as i64);
        if d.content_rounds > longest {
            ok4 = false;
        }
        let phi = oracle_phi(&g);
        let views = build_local_views(&d, Exec::default()).unwrap();
        for v in &views {
            let row = v.phi_over_all_leaders(n, m);
            for k in 0..m {
                worst_phi = worst_phi.max((row[k] - phi[(v.follower.0 - 1, k)]).abs());
            }
        }
    }
    ok5 &= worst_phi <= 1e-10;
    (
        (
            ok4,
            format!("{graphs} graphs, sets equal to oracle: {ok4}, max(content rounds − longest path) = {max_rounds_slack}"),
        ),
        (ok5, format!("max |Φ − Φ_global| = {worst_phi:.1e}")),
    )
}

/// Leader-order error dynamics matrix for the dynamics estimates, built from
/// the edge list.
fn oracle_h_s(g: &Graph) -> (M, Vec<(AgentId, AgentId)>) {
    let n = g.n();
    let mut blocks = Vec::new();
    let mut order = Vec::new();
    for l in g.leaders() {
        let members: Vec<AgentId> = g
            .followers()
            .filter(|&i| {
                let mut src = upstream_followers(g, i);
                src.insert(i);
                g.edges().any(|e| e.from == l && src.contains(&e.to))
            })
            .collect();
        let k = members.len();
        let mut h = M::zeros(k, k);
        for (a, &i) in members.iter().enumerate() {
            for e in g.edges().filter(|e| e.to == i) {
                if e.from == l {
                    h[(a, a)] += e.weight;
                } else if let Some(b) = members.iter().position(|&j| j == e.from) {
                    h[(a, a)] += e.weight;
                    h[(a, b)] -= e.weight;
                }
            }
            order.push((i, l));
        }
        let _ = n;
        blocks.push(h);
    }
    let total: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut hs = M::zeros(total, total);
    let mut o = 0;
    for b in &blocks {
        hs.view_mut((o, o), b.shape()).copy_from(b);
        o += b.nrows();
    }
    (hs, order)
}

fn observer_offset(run: &ExampleRun) -> (usize, usize) {
    let syn = run.outcome.synthesis.as_ref().unwrap();
    let s = &run.scenario;
    let sys = ClosedLoopSystem::new(&s.followers, &syn.gains, &syn.layout, &s.leaders, s.observer_gains).unwrap();
    let r = sys.observer_range();
    (r.start, r.end)
}

fn criterion_6(run: &ExampleRun) -> (bool, String) {
    let trace = run.outcome.trace.as_ref().unwrap();
    let s = &run.scenario;
    let mut notes = Vec::new();
    // all norms below 1e-3 from t = 10 on
    let mut late_max = 0.0f64;
    for p in trace.samples.iter().filter(|p| p.t >= 10.0 - 1e-9) {
        for e in &p.estimation {
            late_max = late_max.max(e.s).max(e.d).max(e.eta);
        }
    }
    let small = late_max < 1e-3;
    notes.push(format!("max norm for t ≥ 10: {late_max:.2e}"));
    // monotone decrease after t = 2
    let mut mono = true;
    for t in 0..s.n() {
        for (name, get) in [
            ("S", (|e: &containsim::observer::EstimationError| e.s) as fn(&_) -> f64),
            ("D", |e| e.d),
            ("η", |e| e.eta),
        ] {
            let series: Vec<(f64, f64)> = trace
                .samples
                .iter()
                .filter(|p| p.t >= 2.0 - 1e-9)
                .map(|p| (p.t, get(&p.estimation[t])))
                .collect();
            if let Some(w) = series.windows(2).find(|w| w[1].1 > w[0].1) {
                mono = false;
                notes.push(format!(
                    "‖{name}̃_{}‖ rises at t = {:.2} ({:.3e} → {:.3e})",
                    t + 1,
                    w[1].0,
                    w[0].1,
                    w[1].1
                ));
            }
        }
    }
    // stacked dynamics-estimate errors against the linear error system
    let syn = run.outcome.synthesis.as_ref().unwrap();
    let (hs, order) = oracle_h_s(&s.graph);
    let q = s.q();
    let rows = order.len() * q;
    let big = M::identity(q, q).kronecker(&hs.kronecker(&M::identity(q, q))) * (-s.observer_gains.beta_s);
    let (o0, _) = observer_offset(run);
    let stack_at = |state: &[f64]| {
        let obs = &state[o0..];
        let mut m = M::zeros(rows, q);
        for (k, &(i, l)) in order.iter().enumerate() {
            let b = syn.layout.block_index(i, l).expect("tracked pair");
            let blk = syn.layout.read_block(obs, b);
            let truth = &s.leaders[l.0 - s.n() - 1].s;
            m.view_mut((k * q, 0), (q, q)).copy_from(&(blk.s_hat - truth));
        }
        DVector::from_column_slice(m.as_slice())
    };
    let v0 = stack_at(&trace.samples[0].state);
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let p = trace.sample_at(t);
        let predicted = (&big * p.t).exp() * &v0;
        let got = stack_at(&p.state);
        worst = worst.max((predicted - got).amax());
    }
    let matches = worst <= 1e-6;
    notes.push(format!("max |vec S̃ − linear solution| at 5 times: {worst:.1e}"));
    (small && mono && matches, notes.join(" | "))
}

fn containment_holds(run: &ExampleRun) -> (bool, f64, f64) {
    let trace = run.outcome.trace.as_ref().unwrap();
    let last = trace.last();
    let worst_e = (0..run.scenario.n()).map(|t| last.e_norm(t)).fold(0.0, f64::max);
    let worst_d = trace
        .samples
        .iter()
        .filter(|p| p.t >= 15.0 - 1e-9)
        .flat_map(|p| p.dist.iter().copied())
        .fold(0.0, f64::max);
    (worst_e < 1e-2 && worst_d < 5e-2, worst_e, worst_d)
}

fn criterion_7(run: &ExampleRun) -> (bool, String) {
    let (ok, e, dmax) = containment_holds(run);
    // negative control: zero feedforward gains
    let s = &run.scenario;
    let syn = run.outcome.synthesis.as_ref().unwrap();
    let views = run.outcome.views.as_ref().unwrap();
    let zeroed: Vec<GainSet> = syn
        .gains
        .iter()
        .map(|g| GainSet {
            k2: M::zeros(g.k2.nrows(), g.k2.ncols()),
            ..g.clone()
        })
        .collect();
    let trace = pipeline::simulate(s, views, &syn.layout, &zeroed).unwrap();
    let control = ExampleRun {
        scenario: s.clone(),
        outcome: RunOutcome {
            trace: Some(trace),
            ..RunOutcome::default()
        },
    };
    let (control_ok, ce, cd) = containment_holds(&control);
    (
        ok && !control_ok,
        format!(
            "max ‖ē(20)‖ {e:.2e}, max dist (t ≥ 15) {dmax:.2e}; zeroed K²: ‖ē(20)‖ {ce:.2e}, dist {cd:.2e}, passes: {control_ok}"
        ),
    )
}

fn criterion_8(run: &ExampleRun) -> (bool, String) {
    let syn = run.outcome.synthesis.as_ref().unwrap();
    let cl = &syn.closed_loop;
    // residuals recomputed here
    let rs = (&cl.a_c * &cl.x_bar + &cl.b_c - &cl.x_bar * &cl.s_omega).norm();
    let ro = (&cl.c_c * &cl.x_bar + &cl.d_c).norm();
    let hurwitz = is_hurwitz(&cl.a_c);
    let max_re = cl.a_c.complex_eigenvalues().iter().map(|e| e.re).fold(f64::MIN, f64::max);
    (
        rs <= 1e-8 && ro <= 1e-8 && hurwitz && max_re < 0.0,
        format!("residuals {rs:.1e}/{ro:.1e}, hurwitz {hurwitz}, spectral abscissa {max_re:.3}"),
    )
}

fn criterion_9(run: &ExampleRun) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    // Sylvester
    let mut worst_syl = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=6);
        let p = rng.random_range(1..=6);
        let a = M::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)) + M::identity(n, n) * 4.0;
        let lam = M::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0)) - M::identity(p, p) * 4.0;
        let q = M::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let x = solve_sylvester(&a, &lam, &q).unwrap();
        worst_syl = worst_syl.max((&a * &x - &x * &lam - &q).norm());
    }
    // RK4 on the closed loop of the example
    let s = &run.scenario;
    let syn = run.outcome.synthesis.as_ref().unwrap();
    let sys = ClosedLoopSystem::new(&s.followers, &syn.gains, &syn.layout, &s.leaders, s.observer_gains).unwrap();
    let obs0 = pipeline::initial_observer(s, &syn.layout).unwrap();
    let y0 = sim::initial_state(&sys, &s.omega0, &s.x0, &obs0).unwrap();
    let solve = |h: f64| {
        let mut y = y0.clone();
        let steps = (1.0 / h).round() as usize;
        sim::rk4_integrate(|_, a, b| sys.rhs(a, b), &mut y, h, steps, steps, |_, _, _| {}).unwrap();
        DVector::from_vec(y)
    };
    let reference = solve(1.0 / 1600.0);
    let e1 = (solve(1.0 / 25.0) - &reference).norm();
    let e2 = (solve(1.0 / 50.0) - &reference).norm();
    let ratio = e1 / e2;
    // hull distance
    let mut worst_fw = 0.0f64;
    for _ in 0..50 {
        let k = rng.random_range(1..=6);
        let pts: Vec<[f64; 2]> = (0..k)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let y = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let vecs: Vec<DVector<f64>> = pts.iter().map(|p| DVector::from_column_slice(p)).collect();
        let got = hull_distance(&y, &vecs).distance;
        worst_fw = worst_fw.max((got - oracle_hull_distance_2d(y, &pts)).abs());
    }
    (
        worst_syl <= 1e-10 && ratio >= 8.0 && worst_fw <= 1e-6,
        format!("Sylvester residual {worst_syl:.1e}, RK4 ratio {ratio:.2}, hull error {worst_fw:.1e}"),
    )
}

fn main() {
    let mut lines: Vec<(usize, Verdict, Duration)> = Vec::new();
    lines.push((1, timed(criterion_1), Duration::from_secs(1)));
    lines.push((2, timed(criterion_2), Duration::from_secs(1)));
    lines.push((3, timed(criterion_3), Duration::from_secs(5)));
    let t0 = Instant::now();
    let (c4, c5) = criterion_4_and_5();
    let el = t0.elapsed();
    lines.push((4, Verdict { ok: c4.0, detail: c4.1, elapsed: el }, Duration::from_secs(10)));
    lines.push((5, Verdict { ok: c5.0, detail: c5.1, elapsed: el }, Duration::from_secs(10)));

    let t0 = Instant::now();
    let run = run_example(Scenario::example());
    let sim_time = t0.elapsed();
    let mut v6 = timed(|| criterion_6(&run));
    v6.elapsed += sim_time;
    lines.push((6, v6, Duration::from_secs(30)));
    let mut v7 = timed(|| criterion_7(&run));
    v7.elapsed += sim_time;
    lines.push((7, v7, Duration::from_secs(60)));
    lines.push((8, timed(|| criterion_8(&run)), Duration::from_secs(30)));
    lines.push((9, timed(|| criterion_9(&run)), Duration::from_secs(30)));

    let mut failed = 0;
    for (k, v, budget) in &lines {
        let ok = v.ok && v.elapsed <= *budget;
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {k} ({:.2} s, budget {} s): {}",
            if ok { "PASS" } else { "FAIL" },
            v.elapsed.as_secs_f64(),
            budget.as_secs(),
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
