//! Scenarios: a starting principal, an ordered list of actions and a goal.

use serde::{Deserialize, Serialize};

use crate::action::{Action, Observation, Session, Status, TraceEntry};
use crate::engine::Simulator;
use crate::error::{DocumentError, ScenarioError};
use crate::model::{ClusterState, ServiceRef};
use crate::network::{reachable, Location};
use crate::policy::PolicySet;

/// Who the attacker is when the scenario starts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Prerequisite {
    /// Subject of the issued credential the attacker starts with.
    pub principal: String,
    #[serde(default)]
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(
    tag = "type",
    rename_all = "camelCase",
    rename_all_fields = "camelCase"
)]
pub enum Goal {
    /// Records of the topic were returned to the attacker.
    TopicDataRead {
        topic: String,
    },
    /// The route was served and disclosed the file.
    PayloadRouteServed {
        path: String,
        disclosed_file: String,
    },
    /// The service answers callers outside the cluster at the end of the run.
    ExternallyReachable {
        service: ServiceRef,
    },
    /// The attacker holds a cluster-admin credential.
    ClusterAdminObtained,
    /// A pod outside the starting service account's namespace was deleted.
    CrossNamespacePodDeleted,
    /// Some applied observation mentions the text. Not capability-mappable.
    ObservationContains {
        text: String,
    },
    AllOf {
        goals: Vec<Goal>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub title: String,
    pub prerequisite: Prerequisite,
    pub steps: Vec<Action>,
    pub goal: Goal,
}

impl Scenario {
    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("scenario serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(
    tag = "outcome",
    rename_all = "camelCase",
    rename_all_fields = "camelCase"
)]
pub enum Outcome {
    Achieved,
    Blocked {
        step_index: usize,
        rule_id: String,
    },
    Denied {
        step_index: usize,
    },
    Failed {
        step_index: usize,
        reason: String,
    },
    /// Every step applied but the goal does not hold.
    GoalNotMet,
}

impl Outcome {
    pub fn is_achieved(&self) -> bool {
        matches!(self, Outcome::Achieved)
    }

    pub fn is_blocked(&self) -> bool {
        matches!(self, Outcome::Blocked { .. })
    }

    pub fn step_index(&self) -> Option<usize> {
        match self {
            Outcome::Blocked { step_index, .. }
            | Outcome::Denied { step_index }
            | Outcome::Failed { step_index, .. } => Some(*step_index),
            Outcome::Achieved | Outcome::GoalNotMet => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Achieved => "achieved",
            Outcome::Blocked { .. } => "blocked",
            Outcome::Denied { .. } => "denied",
            Outcome::Failed { .. } => "failed",
            Outcome::GoalNotMet => "goal-not-met",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioVerdict {
    pub scenario_id: String,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub trace: Vec<TraceEntry>,
}

/// A verdict together with where the run left the world.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub verdict: ScenarioVerdict,
    pub initial_session: Session,
    pub state: ClusterState,
    pub session: Session,
}

pub fn resolve_prerequisite(
    fixture: &ClusterState,
    prerequisite: &Prerequisite,
) -> Result<Session, ScenarioError> {
    let cred = fixture
        .issued_credential(&prerequisite.principal)
        .ok_or_else(|| ScenarioError::UnresolvedPrerequisite(prerequisite.principal.clone()))?;
    Ok(Session::new(cred, prerequisite.location.clone()))
}

/// Runs the steps in order, stopping at the first result that is not applied.
pub fn execute(
    fixture: &ClusterState,
    scenario: &Scenario,
    policy: &PolicySet,
) -> Result<ScenarioRun, ScenarioError> {
    let initial_session = resolve_prerequisite(fixture, &scenario.prerequisite)?;
    let mut sim = Simulator::new(fixture.clone(), initial_session.clone(), policy);
    let mut outcome = None;
    for (step_index, action) in scenario.steps.iter().enumerate() {
        let result = sim.apply(action.clone());
        outcome = match result.status {
            Status::Applied => continue,
            Status::BlockedPolicy { rule_id } => Some(Outcome::Blocked {
                step_index,
                rule_id,
            }),
            Status::DeniedRbac { .. } => Some(Outcome::Denied { step_index }),
            Status::FailedPrecondition { reason } => Some(Outcome::Failed { step_index, reason }),
        };
        break;
    }
    let outcome = outcome.unwrap_or_else(|| {
        let ctx = GoalContext {
            fixture,
            initial_session: &initial_session,
            state: &sim.state,
            session: &sim.session,
            trace: &sim.trace,
        };
        if ctx.holds(&scenario.goal) {
            Outcome::Achieved
        } else {
            Outcome::GoalNotMet
        }
    });
    Ok(ScenarioRun {
        verdict: ScenarioVerdict {
            scenario_id: scenario.id.clone(),
            outcome,
            trace: sim.trace,
        },
        initial_session,
        state: sim.state,
        session: sim.session,
    })
}

pub fn run_scenario(
    fixture: &ClusterState,
    scenario: &Scenario,
    policy: &PolicySet,
) -> Result<ScenarioVerdict, ScenarioError> {
    execute(fixture, scenario, policy).map(|run| run.verdict)
}

/// Everything a goal may look at once the run is over.
pub struct GoalContext<'a> {
    pub fixture: &'a ClusterState,
    pub initial_session: &'a Session,
    pub state: &'a ClusterState,
    pub session: &'a Session,
    pub trace: &'a [TraceEntry],
}

impl GoalContext<'_> {
    fn applied(&self) -> impl Iterator<Item = (&Action, &Observation)> {
        self.trace.iter().filter_map(|e| {
            e.result
                .observation
                .as_ref()
                .filter(|_| e.result.is_applied())
                .map(|o| (&e.action, o))
        })
    }

    pub fn holds(&self, goal: &Goal) -> bool {
        match goal {
            Goal::TopicDataRead { topic } => self
                .applied()
                .any(|(_, o)| matches!(o, Observation::Records { topic: t, .. } if t == topic)),
            Goal::PayloadRouteServed {
                path,
                disclosed_file,
            } => self.applied().any(|(a, o)| {
                matches!(a, Action::TriggerPayloadRoute { path: p, .. } if p == path)
                    && matches!(o, Observation::FileContents { path: f, .. } if f == disclosed_file)
            }),
            Goal::ExternallyReachable { service } => self
                .state
                .service_by_ref(service)
                .is_some_and(|s| reachable(&Location::External, s)),
            Goal::ClusterAdminObtained => self.session.holds_cluster_admin(),
            Goal::CrossNamespacePodDeleted => {
                let home = self.initial_session.credential.home_namespace();
                self.applied().any(|(a, _)| {
                    matches!(a, Action::DeletePod { namespace, .. } if Some(namespace.as_str()) != home)
                })
            }
            Goal::ObservationContains { text } => self
                .applied()
                .any(|(_, o)| serde_json::to_string(o).is_ok_and(|s| s.contains(text.as_str()))),
            Goal::AllOf { goals } => goals.iter().all(|g| self.holds(g)),
        }
    }
}

/// Parses a scenario document.
pub fn load_scenario(document: &str) -> Result<Scenario, DocumentError> {
    const DOC: &str = "scenario";
    let scenario: Scenario =
        serde_yaml::from_str(document).map_err(|e| DocumentError::from_yaml(DOC, e))?;
    if scenario.id.trim().is_empty() {
        return Err(DocumentError::invalid(DOC, "field `id` must not be empty"));
    }
    if scenario.steps.is_empty() {
        return Err(DocumentError::invalid(
            DOC,
            "field `steps` must not be empty",
        ));
    }
    Ok(scenario)
}
