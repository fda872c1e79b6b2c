//! Deterministic simulation of CI/CD and cluster privilege-escalation attacks.
//!
//! A [`model::ClusterState`] is loaded from a fixture, scenarios drive it
//! through [`engine::apply_action`], [`policy::PolicySet`] blocks enabling
//! actions, and [`analyzer::analyze`] predicts the same outcomes from
//! capabilities alone.

pub mod action;
pub mod analyzer;
pub mod builtin;
pub mod cli;
pub mod engine;
pub mod error;
pub mod explore;
pub mod fixture;
pub mod model;
pub mod network;
pub mod policy;
pub mod rbac;
pub mod report;
pub mod scenario;

pub use action::{Action, ActionResult, Session, Status};
pub use analyzer::{agrees_with_simulator, analyze, Capability, EscalationGraph, Foothold};
pub use engine::{apply_action, Simulator};
pub use error::{AnalysisError, AuthzError, DocumentError, ModelError, ScenarioError};
pub use fixture::load_fixture;
pub use model::ClusterState;
pub use policy::{load_policy, PolicySet};
pub use scenario::{load_scenario, run_scenario, Outcome, Scenario, ScenarioVerdict};
