//! Bounded breadth-first search over concrete action sequences.
//!
//! Candidate actions are drawn from the current state: every entity in it,
//! plus one attacker manifest of each shape per namespace. Topic writes are
//! left out since they never yield credentials or network position.

use std::collections::{HashSet, VecDeque};

use crate::action::{Action, Manifest, PodManifest, Session};
use crate::builtin;
use crate::engine::apply_action;
use crate::model::{
    ClusterState, ImageRole, PayloadEdit, ResourceKind, Volume, HOST_ROOT, NODE_PORT_RANGE,
};
use crate::policy::PolicySet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    /// Shortest action sequence reaching the goal, if one exists within the bound.
    pub path: Option<Vec<Action>>,
    /// Distinct (state, session) pairs visited.
    pub states: usize,
    /// Every state within the bound was expanded.
    pub exhaustive: bool,
}

/// Actions worth trying from here, in a deterministic order.
pub fn candidate_actions(state: &ClusterState, session: &Session) -> Vec<Action> {
    let mut out = Vec::new();
    for cred in &session.wallet {
        if cred != &session.credential {
            out.push(Action::Authenticate {
                subject: cred.subject.clone(),
            });
        }
    }
    let free_port = NODE_PORT_RANGE
        .clone()
        .find(|p| !state.node_port_in_use(*p, None));
    let tooling = state.registry.images.keys().next().cloned();
    let relay = state
        .registry
        .images
        .iter()
        .find(|(_, i)| i.role == ImageRole::Relay)
        .map(|(r, _)| r.clone());
    for ns in &state.namespaces {
        if let Some(image) = &tooling {
            let pod = PodManifest::new("attacker-pod", ns, image.clone())
                .volume(Volume::host_path(HOST_ROOT, "/host"));
            out.push(apply(Manifest::Pod(pod)));
        }
        if let Some(image) = &relay {
            let pod = PodManifest::new("custom-app", ns, image.clone()).label("app", "custom-app");
            out.push(apply(Manifest::Pod(pod)));
        }
        if let Some(port) = free_port {
            out.push(apply(Manifest::Service(builtin::relay_service(ns, port))));
        }
        for kind in ResourceKind::ALL {
            out.push(Action::KubectlGet {
                kind,
                namespace: Some(ns.clone()),
            });
        }
    }
    for kind in ResourceKind::ALL {
        out.push(Action::KubectlGet {
            kind,
            namespace: None,
        });
    }
    for pod in &state.pods {
        out.push(Action::KubectlExec {
            pod: pod.name.clone(),
            namespace: pod.namespace.clone(),
        });
        out.push(Action::DeletePod {
            pod: pod.name.clone(),
            namespace: pod.namespace.clone(),
        });
        for image in state.registry.images.keys() {
            if image.name == pod.image.name && image != &pod.image {
                out.push(Action::DeployImage {
                    pod: pod.name.clone(),
                    namespace: pod.namespace.clone(),
                    image: image.clone(),
                });
            }
        }
    }
    out.push(Action::ChrootEscape);
    out.push(Action::ReadNodeKubeconfig);
    let routes: Vec<&String> = state
        .registry
        .images
        .values()
        .flat_map(|i| i.payload_routes.keys())
        .collect();
    for svc in &state.services {
        let (service, namespace) = (svc.name.clone(), svc.namespace.clone());
        if let (Some(port), None) = (free_port, svc.exposure.node_port()) {
            out.push(Action::AddNodePort {
                service: service.clone(),
                namespace: namespace.clone(),
                node_port: port,
            });
        }
        out.push(Action::Connect {
            service: service.clone(),
            namespace: namespace.clone(),
        });
        for path in &routes {
            out.push(Action::TriggerPayloadRoute {
                service: service.clone(),
                namespace: namespace.clone(),
                path: (*path).clone(),
            });
        }
    }
    for broker in &state.brokers {
        for topic in broker.topics.keys() {
            out.push(Action::ConsumeTopic {
                service: broker.service.name.clone(),
                namespace: broker.service.namespace.clone(),
                topic: topic.clone(),
            });
        }
    }
    for image in state.registry.images.keys() {
        out.push(Action::PullImage {
            image: image.clone(),
        });
    }
    if let Some(ci) = &state.ci_server {
        for user in &ci.users {
            out.push(Action::JenkinsLogin {
                user: user.name.clone(),
            });
        }
        let leak = state
            .source_repo
            .as_ref()
            .and_then(|r| r.files.keys().next().cloned());
        for job in ci.jobs.keys() {
            if let Some(file) = &leak {
                out.push(Action::EditBuildStep {
                    job: job.clone(),
                    step_index: 0,
                    script: "probe".into(),
                    payload: Some(PayloadEdit {
                        route: "/probe".into(),
                        disclosed_file: file.clone(),
                    }),
                });
            }
            out.push(Action::RunBuild { job: job.clone() });
        }
    }
    out
}

fn apply(manifest: Manifest) -> Action {
    Action::KubectlApply { manifest }
}

/// Breadth-first search for the shortest sequence of at most `max_depth`
/// applied actions after which `goal` holds.
pub fn search(
    fixture: &ClusterState,
    start: &Session,
    policy: &PolicySet,
    max_depth: usize,
    goal: impl Fn(&ClusterState, &Session) -> bool,
) -> SearchOutcome {
    struct Node {
        state: ClusterState,
        session: Session,
        parent: Option<(usize, Action)>,
        depth: usize,
    }

    let key = |state: &ClusterState, session: &Session| {
        let mut s = state.clone();
        s.clock = 0;
        (s, session.clone())
    };
    let rebuild = |nodes: &[Node], mut at: usize| {
        let mut path = Vec::new();
        while let Some((parent, action)) = &nodes[at].parent {
            path.push(action.clone());
            at = *parent;
        }
        path.reverse();
        path
    };

    let mut seen = HashSet::new();
    seen.insert(key(fixture, start));
    let mut nodes = vec![Node {
        state: fixture.clone(),
        session: start.clone(),
        parent: None,
        depth: 0,
    }];
    let mut queue = VecDeque::from([0usize]);
    while let Some(at) = queue.pop_front() {
        if goal(&nodes[at].state, &nodes[at].session) {
            return SearchOutcome {
                path: Some(rebuild(&nodes, at)),
                states: seen.len(),
                exhaustive: false,
            };
        }
        if nodes[at].depth == max_depth {
            continue;
        }
        for action in candidate_actions(&nodes[at].state, &nodes[at].session) {
            let t = apply_action(&nodes[at].state, &nodes[at].session, &action, policy);
            if !t.result.is_applied() || !seen.insert(key(&t.state, &t.session)) {
                continue;
            }
            let depth = nodes[at].depth + 1;
            nodes.push(Node {
                state: t.state,
                session: t.session,
                parent: Some((at, action)),
                depth,
            });
            queue.push_back(nodes.len() - 1);
        }
    }
    SearchOutcome {
        path: None,
        states: seen.len(),
        exhaustive: true,
    }
}

/// Shortest path to a session holding a cluster-admin credential.
pub fn search_cluster_admin(
    fixture: &ClusterState,
    start: &Session,
    policy: &PolicySet,
    max_depth: usize,
) -> SearchOutcome {
    search(fixture, start, policy, max_depth, |_, s| {
        s.holds_cluster_admin()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{session_for, small_fixture};

    #[test]
    fn crud_account_finds_the_breakout() {
        let f = small_fixture();
        let start = session_for(&f, builtin::CRUD_SA);
        let found = search_cluster_admin(&f, &start, &PolicySet::empty(), 5);
        let path = found.path.expect("breakout within five steps");
        assert_eq!(path.len(), 4);
        assert!(matches!(path[2], Action::ChrootEscape));
        assert!(matches!(path[3], Action::ReadNodeKubeconfig));
    }

    #[test]
    fn breakout_needs_host_path() {
        let f = small_fixture();
        let start = session_for(&f, builtin::CRUD_SA);
        let policy = PolicySet::single(builtin::host_path_rule());
        let found = search_cluster_admin(&f, &start, &policy, 6);
        assert!(found.path.is_none() && found.exhaustive);
    }
}
