//! Staged driver: validation, discovery, influence rows, gain synthesis and
//! simulation, with JSON/CSV artifacts per stage.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use serde::Serialize;

use crate::discovery::{run_discovery, DiscoveryReport, DiscoveryResult};
use crate::error::{Assumption, Error, Result};
use crate::graph::{self, AgentId};
use crate::linalg;
use crate::local_view::{build_local_views, LocalView, LocalViewReport};
use crate::observer::{is_marginally_stable, EstimationError, ObserverLayout, SliceSet};
use crate::par::Exec;
use crate::scenario::{Label, Scenario};
use crate::sim::{self, ClosedLoopSystem, Trace};
use crate::synth::{
    assemble_closed_loop, is_hurwitz, leader_stacks, solve_regulator, synthesize_gains, ClosedLoop,
    GainSet,
};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Validate,
    Discover,
    Nli,
    Gains,
    Simulate,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Validate,
        Stage::Discover,
        Stage::Nli,
        Stage::Gains,
        Stage::Simulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Validate => "validate",
            Stage::Discover => "discover",
            Stage::Nli => "nli",
            Stage::Gains => "gains",
            Stage::Simulate => "simulate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Scenario(format!("unknown stage {s:?}")))
    }
}

/// An error tagged with the stage that produced it.
#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not checkable because an earlier assumption failed.
    Skipped,
}

/// One assumption check on one object.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub assumption: u8,
    pub title: &'static str,
    pub subject: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    fn push(&mut self, a: Assumption, subject: String, ok: bool, detail: String) {
        self.checks.push(Check {
            assumption: a.number(),
            title: a.title(),
            subject,
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            detail,
        });
    }

    fn skip(&mut self, a: Assumption, subject: String, detail: &str) {
        self.checks.push(Check {
            assumption: a.number(),
            title: a.title(),
            subject,
            status: CheckStatus::Skipped,
            detail: detail.into(),
        });
    }
}

fn names(s: &Scenario, ids: &[AgentId]) -> String {
    ids.iter()
        .map(|&id| s.label(id).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Checks every assumption that can be checked on the scenario and names
/// the violating agents.
pub fn validate(s: &Scenario, exec: Exec) -> ValidationReport {
    let mut r = ValidationReport { checks: Vec::new() };
    let g = &s.graph;

    let unled = graph::unled_followers(g);
    r.push(
        Assumption::LeaderReachability,
        "graph".into(),
        unled.is_empty(),
        if unled.is_empty() {
            "every follower has a path from a leader".into()
        } else {
            format!("followers without a leader path: {}", names(s, &unled))
        },
    );
    let blocked = graph::cycle_blocked(g);
    r.push(
        Assumption::Acyclic,
        "graph".into(),
        blocked.is_empty(),
        if blocked.is_empty() {
            "no directed cycle".into()
        } else {
            format!("agents on or downstream of a directed cycle: {}", names(s, &blocked))
        },
    );
    r.push(
        Assumption::UniqueLabels,
        "agents".into(),
        true,
        format!("{} followers and {} leaders with distinct identifiers", s.n(), s.m()),
    );
    for (t, f) in s.followers.iter().enumerate() {
        let subject = format!("follower {}", s.labels[t]);
        let stab = f.is_stabilizable();
        let rank = f.c_full_row_rank();
        let detail = match (stab, rank) {
            (true, true) => "(A, B) stabilizable and C full row rank".to_string(),
            (false, true) => "(A, B) is not stabilizable".to_string(),
            (true, false) => "C is not full row rank".to_string(),
            (false, false) => "(A, B) is not stabilizable and C is not full row rank".to_string(),
        };
        r.push(Assumption::Stabilizable, subject, stab && rank, detail);
    }
    for (k, l) in s.leaders.iter().enumerate() {
        let subject = format!("leader {}", s.labels[s.n() + k]);
        let ok = is_marginally_stable(&l.s);
        r.push(
            Assumption::MarginalStability,
            subject,
            ok,
            if ok {
                "trajectories of S stay bounded".into()
            } else {
                "trajectories of S grow without bound".into()
            },
        );
    }
    if !(unled.is_empty() && blocked.is_empty()) {
        for t in 0..s.n() {
            r.skip(
                Assumption::RegulatorSolvable,
                format!("follower {}", s.labels[t]),
                "requires a leader path and an acyclic graph",
            );
        }
        return r;
    }
    let views = run_discovery(g, exec).and_then(|d| build_local_views(&d, exec));
    match views {
        Ok(views) => {
            for (t, (f, v)) in s.followers.iter().zip(&views).enumerate() {
                let subject = format!("follower {}", s.labels[t]);
                let (s_stack, d_stack) = leader_stacks(v, &s.leaders, s.n());
                match solve_regulator(v.follower, f, &s_stack, &d_stack, &v.phi, &s.tolerances) {
                    Ok(sol) => r.push(
                        Assumption::RegulatorSolvable,
                        subject,
                        true,
                        format!(
                            "residuals {:.1e} and {:.1e}",
                            sol.residual_dynamics, sol.residual_output
                        ),
                    ),
                    Err(e) => r.push(Assumption::RegulatorSolvable, subject, false, e.to_string()),
                }
            }
        }
        Err(e) => {
            for t in 0..s.n() {
                r.push(
                    Assumption::RegulatorSolvable,
                    format!("follower {}", s.labels[t]),
                    false,
                    e.to_string(),
                );
            }
        }
    }
    r
}

/// Gains, observer layout and certified closed loop.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub gains: Vec<GainSet>,
    pub layout: ObserverLayout,
    pub slices: SliceSet,
    pub closed_loop: ClosedLoop,
    pub closed_loop_hurwitz: bool,
}

pub fn synthesize(
    s: &Scenario,
    d: &DiscoveryResult,
    views: &[LocalView],
    exec: Exec,
) -> Result<Synthesis> {
    let gains = synthesize_gains(
        &s.followers,
        views,
        &s.leaders,
        &s.feedback_specs(),
        s.seed,
        &s.tolerances,
        exec,
    )?;
    let layout = ObserverLayout::new(&s.graph, views, s.q(), s.outputs())?;
    let slices = SliceSet::build(&s.graph, d, &layout)?;
    let closed_loop = assemble_closed_loop(
        &s.followers,
        &gains,
        views,
        &layout,
        &slices,
        &s.leaders,
        &s.observer_gains,
        &s.tolerances,
    )?;
    let closed_loop_hurwitz = is_hurwitz(&closed_loop.a_c);
    Ok(Synthesis {
        gains,
        layout,
        slices,
        closed_loop,
        closed_loop_hurwitz,
    })
}

/// Flat observer state with the scenario's initial estimates.
pub fn initial_observer(s: &Scenario, layout: &ObserverLayout) -> Result<Vec<f64>> {
    let mut obs = vec![0.0; layout.len()];
    for e in &s.estimates {
        let b = layout.block_index(e.follower, e.leader).ok_or_else(|| {
            Error::Scenario(format!(
                "follower {} does not track leader {}",
                s.label(e.follower),
                s.label(e.leader)
            ))
        })?;
        layout.write_block(&mut obs, b, &e.block)?;
    }
    Ok(obs)
}

/// Runs the closed loop from the scenario's initial conditions.
pub fn simulate(
    s: &Scenario,
    views: &[LocalView],
    layout: &ObserverLayout,
    gains: &[GainSet],
) -> Result<Trace> {
    let sys = ClosedLoopSystem::new(&s.followers, gains, layout, &s.leaders, s.observer_gains)?;
    let y0 = sim::initial_state(&sys, &s.omega0, &s.x0, &initial_observer(s, layout)?)?;
    sim::integrate(&sys, views, y0, &s.integration)
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelEntry {
    pub id: AgentId,
    pub label: Label,
}

fn label_entries(s: &Scenario) -> Vec<LabelEntry> {
    s.labels
        .iter()
        .enumerate()
        .map(|(k, l)| LabelEntry {
            id: AgentId(k + 1),
            label: l.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscoveryArtifact {
    pub labels: Vec<LabelEntry>,
    #[serde(flatten)]
    pub discovery: DiscoveryReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct NliEntry {
    pub label: Label,
    pub leader_labels: Vec<Label>,
    #[serde(flatten)]
    pub view: LocalViewReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct NliArtifact {
    pub labels: Vec<LabelEntry>,
    pub followers: Vec<NliEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GainEntry {
    pub follower: AgentId,
    pub label: Label,
    pub leaders: Vec<AgentId>,
    pub pi: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub k1: Vec<Vec<f64>>,
    pub k2: Vec<Vec<f64>>,
    pub k1_given: bool,
    pub feedback_hurwitz: bool,
    pub residual_dynamics: f64,
    pub residual_output: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedLoopEntry {
    pub dimension: usize,
    pub residual_state: f64,
    pub residual_output: f64,
    pub hurwitz: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GainsArtifact {
    pub seed: u64,
    pub followers: Vec<GainEntry>,
    pub closed_loop: ClosedLoopEntry,
}

#[derive(Debug, Clone, Serialize)]
pub struct FollowerSummary {
    pub follower: AgentId,
    pub label: Label,
    pub terminal_error: f64,
    pub terminal_hull_distance: f64,
    pub max_hull_distance_after: f64,
    pub terminal_estimation: EstimationError,
    pub error_within_tol: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub t_end: f64,
    pub samples: usize,
    pub t_from: f64,
    pub hull_tol: f64,
    pub error_tol: f64,
    pub containment_achieved: bool,
    pub errors_within_tol: bool,
    pub followers: Vec<FollowerSummary>,
}

pub fn discovery_artifact(s: &Scenario, d: &DiscoveryResult) -> DiscoveryArtifact {
    DiscoveryArtifact {
        labels: label_entries(s),
        discovery: d.report(),
    }
}

pub fn nli_artifact(s: &Scenario, views: &[LocalView]) -> NliArtifact {
    NliArtifact {
        labels: label_entries(s),
        followers: views
            .iter()
            .map(|v| NliEntry {
                label: s.label(v.follower).clone(),
                leader_labels: v.leaders().iter().map(|&l| s.label(l).clone()).collect(),
                view: v.report(),
            })
            .collect(),
    }
}

pub fn gains_artifact(s: &Scenario, syn: &Synthesis) -> GainsArtifact {
    let rows = linalg::to_rows;
    GainsArtifact {
        seed: s.seed,
        followers: syn
            .gains
            .iter()
            .map(|g| GainEntry {
                follower: g.follower,
                label: s.label(g.follower).clone(),
                leaders: g.leaders.clone(),
                pi: rows(&g.pi),
                gamma: rows(&g.gamma),
                k1: rows(&g.k1),
                k2: rows(&g.k2),
                k1_given: g.k1_given,
                feedback_hurwitz: g.hurwitz,
                residual_dynamics: g.residual_dynamics,
                residual_output: g.residual_output,
            })
            .collect(),
        closed_loop: ClosedLoopEntry {
            dimension: syn.closed_loop.a_c.nrows(),
            residual_state: syn.closed_loop.residual_state,
            residual_output: syn.closed_loop.residual_output,
            hurwitz: syn.closed_loop_hurwitz,
        },
    }
}

pub fn summarize(s: &Scenario, trace: &Trace) -> Summary {
    let c = s.containment;
    let last = trace.last();
    let followers: Vec<FollowerSummary> = (0..s.n())
        .map(|t| {
            let max_after = trace
                .samples
                .iter()
                .filter(|p| p.t >= c.t_from - 1e-12)
                .map(|p| p.dist[t])
                .fold(0.0, f64::max);
            let err = last.e_norm(t);
            FollowerSummary {
                follower: AgentId(t + 1),
                label: s.labels[t].clone(),
                terminal_error: err,
                terminal_hull_distance: last.dist[t],
                max_hull_distance_after: max_after,
                terminal_estimation: last.estimation[t],
                error_within_tol: err < c.error_tol,
            }
        })
        .collect();
    Summary {
        name: s.name.clone(),
        t_end: last.t,
        samples: trace.samples.len(),
        t_from: c.t_from,
        hull_tol: c.hull_tol,
        error_tol: c.error_tol,
        containment_achieved: sim::containment_achieved(trace, c.t_from, c.hull_tol),
        errors_within_tol: followers.iter().all(|f| f.error_within_tol),
        followers,
    }
}

/// Everything a run produced up to its last stage.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub validation: Option<ValidationReport>,
    pub discovery: Option<DiscoveryResult>,
    pub views: Option<Vec<LocalView>>,
    pub synthesis: Option<Synthesis>,
    pub trace: Option<Trace>,
    pub summary: Option<Summary>,
}

impl RunOutcome {
    /// `Some(verdict)` once the simulation stage has run.
    pub fn contained(&self) -> Option<bool> {
        self.summary.as_ref().map(|s| s.containment_achieved)
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Scenario(format!("serializing {name}: {e}")))?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn emit<T: Serialize>(
    out: Option<&Path>,
    stage: Stage,
    name: &str,
    value: &T,
) -> std::result::Result<(), StageError> {
    match out {
        Some(dir) => write_json(dir, name, value).at(stage),
        None => Ok(()),
    }
}

/// Runs stages up to and including `last`, writing each stage's artifacts
/// into `out` (when given) as soon as it completes.
pub fn run(
    s: &Scenario,
    out: Option<&Path>,
    last: Stage,
    exec: Exec,
) -> std::result::Result<RunOutcome, StageError> {
    let mut outcome = RunOutcome::default();
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(Error::from).at(Stage::Validate)?;
    }
    let report = validate(s, exec);
    emit(out, Stage::Validate, "validation.json", &report)?;
    let failure = report.failures().next().map(|f| Error::AssumptionViolated {
        assumption: assumption_by_number(f.assumption),
        detail: format!("{}: {}", f.subject, f.detail),
    });
    outcome.validation = Some(report);
    if let Some(source) = failure {
        return Err(StageError {
            stage: Stage::Validate,
            source,
        });
    }
    info!("validation passed");
    if last == Stage::Validate {
        return Ok(outcome);
    }

    let d = run_discovery(&s.graph, exec).at(Stage::Discover)?;
    emit(out, Stage::Discover, "discovery.json", &discovery_artifact(s, &d))?;
    info!("discovery converged after {} rounds", d.rounds_used);
    outcome.discovery = Some(d);
    if last == Stage::Discover {
        return Ok(outcome);
    }
    let d = outcome.discovery.as_ref().expect("set above");

    let views = build_local_views(d, exec).at(Stage::Nli)?;
    emit(out, Stage::Nli, "nli.json", &nli_artifact(s, &views))?;
    info!("influence rows built for {} followers", views.len());
    outcome.views = Some(views);
    if last == Stage::Nli {
        return Ok(outcome);
    }
    let views = outcome.views.as_ref().expect("set above");

    let syn = synthesize(s, d, views, exec).at(Stage::Gains)?;
    emit(out, Stage::Gains, "gains.json", &gains_artifact(s, &syn))?;
    info!(
        "gains synthesized, closed-loop residuals {:.1e} / {:.1e}",
        syn.closed_loop.residual_state, syn.closed_loop.residual_output
    );
    if !syn.closed_loop_hurwitz {
        return Err(StageError {
            stage: Stage::Gains,
            source: Error::Synthesis("closed-loop matrix is not Hurwitz".into()),
        });
    }
    outcome.synthesis = Some(syn);
    if last == Stage::Gains {
        return Ok(outcome);
    }
    let syn = outcome.synthesis.as_ref().expect("set above");

    let trace = simulate(s, views, &syn.layout, &syn.gains).at(Stage::Simulate)?;
    let summary = summarize(s, &trace);
    if let Some(dir) = out {
        let csv = fs::File::create(dir.join("trace.csv")).map_err(Error::from).at(Stage::Simulate)?;
        sim::write_csv(&trace, std::io::BufWriter::new(csv)).at(Stage::Simulate)?;
        write_json(dir, "summary.json", &summary).at(Stage::Simulate)?;
        fs::write(dir.join("plots.gp"), sim::gnuplot_script(&trace))
            .map_err(Error::from)
            .at(Stage::Simulate)?;
    }
    info!("containment achieved: {}", summary.containment_achieved);
    outcome.trace = Some(trace);
    outcome.summary = Some(summary);
    Ok(outcome)
}

fn assumption_by_number(n: u8) -> Assumption {
    [
        Assumption::LeaderReachability,
        Assumption::Acyclic,
        Assumption::UniqueLabels,
        Assumption::Stabilizable,
        Assumption::MarginalStability,
        Assumption::RegulatorSolvable,
    ]
    .into_iter()
    .find(|a| a.number() == n)
    .unwrap_or(Assumption::LeaderReachability)
}

/// Scenario files (`*.json`) in a directory, sorted by name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs each scenario file into `out/<file stem>`; independent jobs, results
/// in input order.
pub fn run_batch(
    files: &[PathBuf],
    out: Option<&Path>,
    last: Stage,
    exec: Exec,
) -> Vec<std::result::Result<RunOutcome, StageError>> {
    exec.map(files, |path| {
        let s = Scenario::load(path).at(Stage::Validate)?;
        let dir = out.map(|o| o.join(path.file_stem().unwrap_or_default()));
        // one scenario per job; the stages inside run sequentially
        run(&s, dir.as_deref(), last, Exec::Sequential)
    })
}

