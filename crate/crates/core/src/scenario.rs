//! Scenario files: JSON declarations of agents, edges, gains, observer
//! settings, integration parameters and tolerances.
//!
//! Agent identifiers may be integers or strings. Followers are relabelled
//! `1..=n` and leaders `n+1..=n+m` in declaration order; the original
//! identifiers are kept in [`Scenario::labels`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Assumption, Error, Result};
use crate::graph::{AgentId, Edge, Graph};
use crate::linalg::{self, Matrix, Vector};
use crate::observer::{LeaderModel, ObserverBlock, ObserverGains};
use crate::sim::IntegrationConfig;
use crate::synth::{FeedbackSpec, FollowerModel, ToleranceConfig};

/// Agent identifier as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Name(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(v) => write!(f, "{v}"),
            Label::Name(s) => f.write_str(s),
        }
    }
}

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FollowerDecl {
    pub id: Label,
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderDecl {
    pub id: Label,
    pub s: Rows,
    pub d: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsSection {
    pub followers: Vec<FollowerDecl>,
    pub leaders: Vec<LeaderDecl>,
}

/// A desired pole: a real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoleDecl {
    Real(f64),
    Complex([f64; 2]),
}

impl From<PoleDecl> for Complex64 {
    fn from(p: PoleDecl) -> Self {
        match p {
            PoleDecl::Real(re) => Complex64::new(re, 0.0),
            PoleDecl::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

impl From<Complex64> for PoleDecl {
    fn from(z: Complex64) -> Self {
        if z.im == 0.0 {
            PoleDecl::Real(z.re)
        } else {
            PoleDecl::Complex([z.re, z.im])
        }
    }
}

/// Per-follower feedback: given `K¹` matrices or desired poles, keyed by
/// follower identifier.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsSection {
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub k1: BTreeMap<String, Rows>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub poles: BTreeMap<String, Vec<PoleDecl>>,
}

impl GainsSection {
    fn is_empty(&self) -> bool {
        self.k1.is_empty() && self.poles.is_empty()
    }
}

/// Initial estimate of one leader at one follower; omitted parts are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateDecl {
    pub follower: Label,
    pub leader: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverSection {
    pub beta_eta: f64,
    pub beta_s: f64,
    pub beta_d: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub initial: Vec<EstimateDecl>,
}

impl Default for ObserverSection {
    fn default() -> Self {
        let g = ObserverGains::default();
        Self {
            beta_eta: g.beta_eta,
            beta_s: g.beta_s,
            beta_d: g.beta_d,
            initial: Vec::new(),
        }
    }
}

/// Containment verdict parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContainmentConfig {
    /// Hull distances are checked for all samples at or after this time.
    pub t_from: f64,
    pub hull_tol: f64,
    /// Bound on the terminal containment error norm reported in summaries.
    pub error_tol: f64,
}

impl Default for ContainmentConfig {
    fn default() -> Self {
        Self {
            t_from: 15.0,
            hull_tol: 5e-2,
            error_tol: 1e-2,
        }
    }
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    pub agents: AgentsSection,
    pub edges: Vec<(Label, Label, f64)>,
    #[serde(default, skip_serializing_if = "GainsSection::is_empty")]
    pub gains: GainsSection,
    #[serde(default)]
    pub observer: ObserverSection,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub containment: ContainmentConfig,
}

/// Initial observer estimate of `leader` held by `follower`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialEstimate {
    pub follower: AgentId,
    pub leader: AgentId,
    pub block: ObserverBlock,
}

/// Validated scenario in internal labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub seed: u64,
    /// Original identifier of agent `k` at index `k − 1`.
    pub labels: Vec<Label>,
    pub graph: Graph,
    pub followers: Vec<FollowerModel>,
    pub leaders: Vec<LeaderModel>,
    /// `None` selects the default poles.
    pub feedback: Vec<Option<FeedbackSpec>>,
    pub observer_gains: ObserverGains,
    pub x0: Vec<Vector>,
    pub omega0: Vec<Vector>,
    pub estimates: Vec<InitialEstimate>,
    pub integration: IntegrationConfig,
    pub tolerances: ToleranceConfig,
    pub containment: ContainmentConfig,
}

const EXAMPLE_JSON: &str = include_str!("../../../scenarios/example.json");

fn matrix(rows: &Rows, what: impl FnOnce() -> String) -> Result<Matrix> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Scenario(format!("{} is empty", what())));
    }
    linalg::from_rows(rows).map_err(|_| Error::Scenario(format!("{} is not rectangular", what())))
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(parse_error)?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The shipped example network of four followers and three leaders.
    pub fn example() -> Self {
        Self::from_json(EXAMPLE_JSON).expect("shipped scenario is valid")
    }

    pub fn n(&self) -> usize {
        self.followers.len()
    }

    pub fn m(&self) -> usize {
        self.leaders.len()
    }

    pub fn q(&self) -> usize {
        self.leaders[0].q()
    }

    pub fn outputs(&self) -> usize {
        self.leaders[0].outputs()
    }

    pub fn label(&self, id: AgentId) -> &Label {
        &self.labels[id.index()]
    }

    /// Internal id of an original identifier.
    pub fn resolve(&self, key: &str) -> Option<AgentId> {
        self.labels
            .iter()
            .position(|l| l.to_string() == key)
            .map(|p| AgentId(p + 1))
    }

    /// Feedback specification per follower with defaults resolved.
    pub fn feedback_specs(&self) -> Vec<FeedbackSpec> {
        self.followers
            .iter()
            .zip(&self.feedback)
            .map(|(f, spec)| {
                spec.clone()
                    .unwrap_or_else(|| FeedbackSpec::Poles(crate::synth::default_poles(f.states())))
            })
            .collect()
    }

    /// Replaces follower feedback with the given `K¹` matrices, keyed by
    /// original identifier.
    pub fn set_k1(&mut self, k1: &BTreeMap<String, Rows>) -> Result<()> {
        for (key, rows) in k1 {
            let id = self.resolve(key).filter(|id| id.0 <= self.n()).ok_or_else(|| {
                Error::Scenario(format!("K¹ given for unknown follower {key:?}"))
            })?;
            let k = matrix(rows, || format!("K¹ of follower {key}"))?;
            let f = &self.followers[id.index()];
            if k.shape() != (f.inputs(), f.states()) {
                return Err(Error::Scenario(format!(
                    "K¹ of follower {key} is {}x{}, expected {}x{}",
                    k.nrows(),
                    k.ncols(),
                    f.inputs(),
                    f.states()
                )));
            }
            self.feedback[id.index()] = Some(FeedbackSpec::Given(k));
        }
        Ok(())
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        let n = file.agents.followers.len();
        let m = file.agents.leaders.len();
        if n == 0 {
            return Err(Error::Scenario("no followers declared".into()));
        }
        if m == 0 {
            return Err(Error::AssumptionViolated {
                assumption: Assumption::LeaderReachability,
                detail: "no leaders declared".into(),
            });
        }
        let labels: Vec<Label> = file
            .agents
            .followers
            .iter()
            .map(|f| f.id.clone())
            .chain(file.agents.leaders.iter().map(|l| l.id.clone()))
            .collect();
        let mut index: HashMap<String, AgentId> = HashMap::new();
        for (k, l) in labels.iter().enumerate() {
            if index.insert(l.to_string(), AgentId(k + 1)).is_some() {
                return Err(Error::AssumptionViolated {
                    assumption: Assumption::UniqueLabels,
                    detail: format!("identifier {l} declared more than once"),
                });
            }
        }
        let lookup = |l: &Label| {
            index
                .get(&l.to_string())
                .copied()
                .ok_or_else(|| Error::Scenario(format!("unknown agent {l}")))
        };

        let mut leaders = Vec::with_capacity(m);
        let mut omega0 = Vec::with_capacity(m);
        for decl in &file.agents.leaders {
            let id = &decl.id;
            let s = matrix(&decl.s, || format!("S of leader {id}"))?;
            let d = matrix(&decl.d, || format!("D of leader {id}"))?;
            let lm = LeaderModel::new(s, d)
                .map_err(|e| Error::Scenario(format!("leader {id}: {e}")))?;
            omega0.push(initial_vector(decl.omega0.as_deref(), lm.q(), || {
                format!("omega0 of leader {id}")
            })?);
            leaders.push(lm);
        }
        let (q, qo) = (leaders[0].q(), leaders[0].outputs());
        for (decl, lm) in file.agents.leaders.iter().zip(&leaders) {
            if lm.q() != q || lm.outputs() != qo {
                return Err(Error::Scenario(format!(
                    "leader {} has (q, Q) = ({}, {}), expected ({q}, {qo})",
                    decl.id,
                    lm.q(),
                    lm.outputs()
                )));
            }
        }

        let mut followers = Vec::with_capacity(n);
        let mut x0 = Vec::with_capacity(n);
        for decl in &file.agents.followers {
            let id = &decl.id;
            let a = matrix(&decl.a, || format!("A of follower {id}"))?;
            let b = matrix(&decl.b, || format!("B of follower {id}"))?;
            let c = matrix(&decl.c, || format!("C of follower {id}"))?;
            let f = FollowerModel::new(a, b, c)
                .map_err(|e| Error::Scenario(format!("follower {id}: {e}")))?;
            if f.outputs() != qo {
                return Err(Error::Scenario(format!(
                    "follower {id} has {} outputs, leaders have {qo}",
                    f.outputs()
                )));
            }
            x0.push(initial_vector(decl.x0.as_deref(), f.states(), || {
                format!("x0 of follower {id}")
            })?);
            followers.push(f);
        }

        let mut weights: BTreeMap<(AgentId, AgentId), f64> = BTreeMap::new();
        for (from, to, w) in &file.edges {
            let key = (lookup(from)?, lookup(to)?);
            if let Some(&old) = weights.get(&key) {
                if old != *w {
                    return Err(Error::Scenario(format!(
                        "edge {from} -> {to} declared with weights {old} and {w}"
                    )));
                }
            }
            weights.insert(key, *w);
        }
        let graph = Graph::new(
            n,
            m,
            weights.iter().map(|(&(from, to), &weight)| Edge { from, to, weight }),
        )
        .map_err(|e| Error::Scenario(e.to_string()))?;

        let mut scenario = Self {
            name: file.name,
            description: file.description,
            seed: file.seed,
            labels,
            graph,
            followers,
            leaders,
            feedback: vec![None; n],
            observer_gains: ObserverGains {
                beta_eta: file.observer.beta_eta,
                beta_s: file.observer.beta_s,
                beta_d: file.observer.beta_d,
            },
            x0,
            omega0,
            estimates: Vec::new(),
            integration: file.integration,
            tolerances: file.tolerances,
            containment: file.containment,
        };
        scenario.observer_gains.validate()?;
        scenario.integration.validate()?;

        for key in file.gains.k1.keys() {
            if file.gains.poles.contains_key(key) {
                return Err(Error::Scenario(format!(
                    "follower {key} has both K¹ and desired poles"
                )));
            }
        }
        scenario.set_k1(&file.gains.k1)?;
        for (key, poles) in &file.gains.poles {
            let id = scenario
                .resolve(key)
                .filter(|id| id.0 <= n)
                .ok_or_else(|| Error::Scenario(format!("poles given for unknown follower {key:?}")))?;
            let states = scenario.followers[id.index()].states();
            if poles.len() != states {
                return Err(Error::Scenario(format!(
                    "follower {key} needs {states} poles, got {}",
                    poles.len()
                )));
            }
            scenario.feedback[id.index()] =
                Some(FeedbackSpec::Poles(poles.iter().map(|&p| p.into()).collect()));
        }

        for e in &file.observer.initial {
            let follower = lookup(&e.follower)?;
            let leader = lookup(&e.leader)?;
            if follower.0 > n || leader.0 <= n {
                return Err(Error::Scenario(format!(
                    "initial estimate must pair a follower with a leader, got ({}, {})",
                    e.follower, e.leader
                )));
            }
            let what = || format!("initial estimate of {} at {}", e.leader, e.follower);
            let eta = initial_vector(e.eta.as_deref(), q, what)?;
            let s_hat = initial_matrix(e.s.as_ref(), q, q, what)?;
            let d_hat = initial_matrix(e.d.as_ref(), qo, q, what)?;
            scenario.estimates.push(InitialEstimate {
                follower,
                leader,
                block: ObserverBlock { eta, s_hat, d_hat },
            });
        }
        Ok(scenario)
    }

    /// File form using the original identifiers.
    pub fn to_file(&self) -> ScenarioFile {
        let n = self.n();
        let rows = linalg::to_rows;
        let followers = self
            .followers
            .iter()
            .zip(&self.x0)
            .enumerate()
            .map(|(t, (f, x))| FollowerDecl {
                id: self.labels[t].clone(),
                a: rows(&f.a),
                b: rows(&f.b),
                c: rows(&f.c),
                x0: Some(x.as_slice().to_vec()),
            })
            .collect();
        let leaders = self
            .leaders
            .iter()
            .zip(&self.omega0)
            .enumerate()
            .map(|(k, (l, w))| LeaderDecl {
                id: self.labels[n + k].clone(),
                s: rows(&l.s),
                d: rows(&l.d),
                omega0: Some(w.as_slice().to_vec()),
            })
            .collect();
        let edges = self
            .graph
            .edges()
            .map(|e| (self.label(e.from).clone(), self.label(e.to).clone(), e.weight))
            .collect();
        let mut gains = GainsSection::default();
        for (t, spec) in self.feedback.iter().enumerate() {
            let key = self.labels[t].to_string();
            match spec {
                Some(FeedbackSpec::Given(k)) => {
                    gains.k1.insert(key, rows(k));
                }
                Some(FeedbackSpec::Poles(p)) => {
                    gains.poles.insert(key, p.iter().map(|&z| z.into()).collect());
                }
                None => {}
            }
        }
        let initial = self
            .estimates
            .iter()
            .map(|e| EstimateDecl {
                follower: self.label(e.follower).clone(),
                leader: self.label(e.leader).clone(),
                eta: Some(e.block.eta.as_slice().to_vec()),
                s: Some(rows(&e.block.s_hat)),
                d: Some(rows(&e.block.d_hat)),
            })
            .collect();
        ScenarioFile {
            name: self.name.clone(),
            description: self.description.clone(),
            seed: self.seed,
            agents: AgentsSection { followers, leaders },
            edges,
            gains,
            observer: ObserverSection {
                beta_eta: self.observer_gains.beta_eta,
                beta_s: self.observer_gains.beta_s,
                beta_d: self.observer_gains.beta_d,
                initial,
            },
            integration: self.integration,
            tolerances: self.tolerances,
            containment: self.containment,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }
}

fn initial_vector(v: Option<&[f64]>, len: usize, what: impl FnOnce() -> String) -> Result<Vector> {
    match v {
        None => Ok(Vector::zeros(len)),
        Some(v) if v.len() == len => Ok(Vector::from_column_slice(v)),
        Some(v) => Err(Error::Scenario(format!(
            "{} has length {}, expected {len}",
            what(),
            v.len()
        ))),
    }
}

fn initial_matrix(
    m: Option<&Rows>,
    rows: usize,
    cols: usize,
    what: impl FnOnce() -> String,
) -> Result<Matrix> {
    match m {
        None => Ok(Matrix::zeros(rows, cols)),
        Some(r) => {
            let what = what();
            let mat = matrix(r, || what.clone())?;
            if mat.shape() != (rows, cols) {
                return Err(Error::Scenario(format!(
                    "{what} is {}x{}, expected {rows}x{cols}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            Ok(mat)
        }
    }
}

/// Parses a `K¹` file: a JSON object from follower identifier to matrix.
pub fn parse_k1_file(text: &str) -> Result<BTreeMap<String, Rows>> {
    serde_json::from_str(text).map_err(parse_error)
}
