//! Least-privilege mitigation rules checked before every action.
//!
//! Each rule kind targets the single enabling action of one attack class:
//!
//! | rule                               | blocks                                              |
//! |------------------------------------|-----------------------------------------------------|
//! | `NamespaceScopedServiceAccounts`   | service-account creates/updates outside its namespace |
//! | `JenkinsBuildEditRestriction`      | build-step edits by principals not on the allow list |
//! | `IngressObjectRestriction`         | NodePort additions to protected services            |
//! | `HostPathRestriction`              | pod manifests carrying hostPath volumes             |
//!
//! Reads are never blocked.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionKind, Session};
use crate::error::DocumentError;
use crate::model::{ClusterState, CredentialLevel, ServiceRef, Verb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum HostPathMode {
    /// No hostPath volumes at all; storage lives off-cluster.
    DenyAll,
    /// Only cluster-admin sessions may create hostPath pods.
    AdminOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all_fields = "camelCase")]
pub enum RuleKind {
    NamespaceScopedServiceAccounts,
    JenkinsBuildEditRestriction {
        allowed_principals: Vec<String>,
    },
    IngressObjectRestriction {
        protected_services: Vec<ServiceRef>,
        #[serde(default)]
        allowed_principals: Vec<String>,
    },
    HostPathRestriction {
        mode: HostPathMode,
    },
}

impl RuleKind {
    pub fn name(&self) -> &'static str {
        match self {
            RuleKind::NamespaceScopedServiceAccounts => "NamespaceScopedServiceAccounts",
            RuleKind::JenkinsBuildEditRestriction { .. } => "JenkinsBuildEditRestriction",
            RuleKind::IngressObjectRestriction { .. } => "IngressObjectRestriction",
            RuleKind::HostPathRestriction { .. } => "HostPathRestriction",
        }
    }

    /// Action kinds this rule may ever block.
    pub fn governed_kinds(&self) -> &'static [ActionKind] {
        match self {
            RuleKind::NamespaceScopedServiceAccounts => &[
                ActionKind::KubectlApply,
                ActionKind::AddNodePort,
                ActionKind::DeployImage,
            ],
            RuleKind::JenkinsBuildEditRestriction { .. } => &[ActionKind::EditBuildStep],
            RuleKind::IngressObjectRestriction { .. } => &[ActionKind::AddNodePort],
            RuleKind::HostPathRestriction { .. } => &[ActionKind::KubectlApply],
        }
    }

    pub fn blocks(&self, session: &Session, action: &Action) -> bool {
        let cred = &session.credential;
        match self {
            RuleKind::NamespaceScopedServiceAccounts => {
                let Some(home) = cred.home_namespace() else {
                    return false;
                };
                matches!(
                    action.api_write(),
                    Some((Verb::Create | Verb::Update, _, target)) if target != home
                )
            }
            RuleKind::JenkinsBuildEditRestriction { allowed_principals } => {
                matches!(action, Action::EditBuildStep { .. })
                    && !allowed_principals.contains(&cred.subject)
            }
            RuleKind::IngressObjectRestriction {
                protected_services,
                allowed_principals,
            } => match action {
                Action::AddNodePort {
                    service, namespace, ..
                } => {
                    protected_services.contains(&ServiceRef::new(namespace, service))
                        && !allowed_principals.contains(&cred.subject)
                }
                _ => false,
            },
            RuleKind::HostPathRestriction { mode } => match action {
                Action::KubectlApply { manifest } if manifest.has_host_path() => match mode {
                    HostPathMode::DenyAll => true,
                    HostPathMode::AdminOnly => cred.level != CredentialLevel::ClusterAdmin,
                },
                _ => false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyRule {
    pub id: String,
    #[serde(flatten)]
    pub kind: RuleKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicySet {
    #[serde(default)]
    pub rules: Vec<PolicyRule>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyDecision {
    Pass,
    Block(String),
}

impl PolicySet {
    pub fn empty() -> Self {
        PolicySet::default()
    }

    pub fn single(rule: PolicyRule) -> Self {
        PolicySet { rules: vec![rule] }
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// First rule in declaration order that blocks the action, if any.
    ///
    /// The state parameter is part of the evaluation contract; none of the
    /// current rule kinds need to consult it.
    pub fn evaluate(
        &self,
        _state: &ClusterState,
        session: &Session,
        action: &Action,
    ) -> PolicyDecision {
        self.rules
            .iter()
            .find(|r| r.kind.blocks(session, action))
            .map_or(PolicyDecision::Pass, |r| {
                PolicyDecision::Block(r.id.clone())
            })
    }

    pub fn with_rule(&self, rule: PolicyRule) -> PolicySet {
        let mut next = self.clone();
        next.rules.push(rule);
        next
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("policy serializes")
    }
}

/// Parses a policy document. An empty document is the empty (baseline) policy.
pub fn load_policy(document: &str) -> Result<PolicySet, DocumentError> {
    const DOC: &str = "policy";
    let meaningful = document
        .lines()
        .any(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    if !meaningful {
        return Ok(PolicySet::empty());
    }
    let set: PolicySet =
        serde_yaml::from_str(document).map_err(|e| DocumentError::from_yaml(DOC, e))?;
    let mut ids = BTreeSet::new();
    for rule in &set.rules {
        if rule.id.trim().is_empty() {
            return Err(DocumentError::invalid(DOC, "rule id must not be empty"));
        }
        if !ids.insert(rule.id.as_str()) {
            return Err(DocumentError::invalid(
                DOC,
                format!("duplicate rule id `{}`", rule.id),
            ));
        }
    }
    Ok(set)
}
