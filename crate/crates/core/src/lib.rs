//! Distributed containment control for heterogeneous leader-follower networks.
//!
//! The pipeline runs in stages: leader-influence discovery over follower
//! neighbors, local Laplacian views and normalized influence rows, adaptive
//! distributed observers of the leaders, regulator-based gain synthesis, and
//! fixed-step simulation of the closed loop.

// `!(x <= tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discovery;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod local_view;
pub mod observer;
pub mod par;
pub mod pipeline;
pub mod scenario;
pub mod sim;
pub mod synth;

pub use error::{Assumption, Error, Result};
pub use graph::{AgentId, Graph};
pub use par::Exec;
pub use pipeline::{Stage, StageError};
pub use scenario::Scenario;
