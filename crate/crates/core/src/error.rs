use thiserror::Error;

use crate::graph::AgentId;

pub type Result<T> = std::result::Result<T, Error>;

/// Standing assumptions on the network and agent models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Assumption {
    /// Every follower is reachable from at least one leader.
    LeaderReachability,
    /// The communication graph has no directed cycle.
    Acyclic,
    /// Agent labels are unique and typed.
    UniqueLabels,
    /// `(A_i, B_i)` stabilizable and `C_i` full row rank.
    Stabilizable,
    /// Leader dynamics are marginally stable.
    MarginalStability,
    /// The regulator equations have a solution.
    RegulatorSolvable,
}

impl Assumption {
    pub fn number(self) -> u8 {
        match self {
            Assumption::LeaderReachability => 1,
            Assumption::Acyclic => 2,
            Assumption::UniqueLabels => 3,
            Assumption::Stabilizable => 4,
            Assumption::MarginalStability => 6,
            Assumption::RegulatorSolvable => 7,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Assumption::LeaderReachability => "every follower is led",
            Assumption::Acyclic => "graph is acyclic",
            Assumption::UniqueLabels => "labels unique and typed",
            Assumption::Stabilizable => "stabilizable with full-row-rank output",
            Assumption::MarginalStability => "leaders marginally stable",
            Assumption::RegulatorSolvable => "regulator equations solvable",
        }
    }
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "assumption {} ({})", self.number(), self.title())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("agent {0} is a leader, expected a follower")]
    NotAFollower(AgentId),

    #[error("agent {0} is a follower, expected a leader")]
    NotALeader(AgentId),

    #[error("{assumption} violated: {detail}")]
    AssumptionViolated {
        assumption: Assumption,
        detail: String,
    },

    #[error("singular matrix (pivot {pivot:e} below {threshold:e})")]
    Singular { pivot: f64, threshold: f64 },

    #[error("Sylvester operator is singular: spectra of the coefficient matrices overlap")]
    SpectraOverlap,

    #[error("regulator equations unsolvable for follower {follower}: residual {residual:e}")]
    RegulatorUnsolvable { follower: AgentId, residual: f64 },

    #[error("synthesis failed: {0}")]
    Synthesis(String),

    #[error("closed-loop assembly inconsistent: {0}")]
    Assembly(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("integration diverged at t = {time}: {detail}")]
    Divergence { time: f64, detail: String },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
