//! Seeded random fixtures and policies shared by the integration tests.
//!
//! Entity names the built-in scenarios refer to are kept fixed, and the
//! broker service always starts internal. Everything an attacker's success
//! depends on is varied: RBAC for the attacker principals, policy contents,
//! relay image presence, the pipeline's stored credential, app exposure,
//! default service accounts, node count and pod placement.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sscs_sim::analyzer::Capability;
use sscs_sim::builtin::{self, small_fixture};
use sscs_sim::model::{
    ClusterState, Exposure, ImageRef, Node, ResourceKind, RoleRule, Scope, ServiceRef, Verb,
};
use sscs_sim::policy::{HostPathMode, PolicyRule, PolicySet, RuleKind};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const ATTACKERS: [&str; 4] = [
    builtin::DEPLOYER_SA,
    builtin::CRUD_SA,
    builtin::NETOPS_SA,
    builtin::PIPELINE_SA,
];

fn random_rule(rng: &mut impl Rng, principal: &str, namespaces: &[String]) -> RoleRule {
    let mut verbs: BTreeSet<Verb> = Verb::ALL
        .into_iter()
        .filter(|_| rng.gen_bool(0.6))
        .collect();
    if verbs.is_empty() {
        verbs.insert(*Verb::ALL.choose(rng).unwrap());
    }
    let mut kinds: BTreeSet<ResourceKind> = [ResourceKind::Pod, ResourceKind::Service]
        .into_iter()
        .filter(|_| rng.gen_bool(0.7))
        .collect();
    if kinds.is_empty() {
        kinds.insert(ResourceKind::Pod);
    }
    let scope = if rng.gen_bool(0.15) {
        Scope::ClusterWide
    } else {
        Scope::Namespace(namespaces.choose(rng).unwrap().clone())
    };
    RoleRule {
        principal: principal.to_owned(),
        verbs,
        resource_kinds: kinds,
        scope,
    }
}

/// A valid small fixture (three namespaces, one or two nodes).
pub fn random_fixture(rng: &mut impl Rng) -> ClusterState {
    let mut f = small_fixture();

    f.role_rules
        .retain(|r| !ATTACKERS.contains(&r.principal.as_str()));
    for principal in ATTACKERS {
        // usually keep the shipped grant so attacks still succeed often
        if rng.gen_bool(0.5) {
            f.role_rules.extend(
                small_fixture()
                    .role_rules
                    .into_iter()
                    .filter(|r| r.principal == principal),
            );
        }
        for _ in 0..rng.gen_range(0..=2) {
            let rule = random_rule(rng, principal, &f.namespaces);
            f.role_rules.push(rule);
        }
    }

    if rng.gen_bool(0.25) {
        f.registry.images.remove(&builtin::relay_image());
    }
    if rng.gen_bool(0.3) {
        f.ci_server.as_mut().unwrap().stored_credentials.clear();
    }
    let app = f
        .services
        .iter_mut()
        .find(|s| s.name == builtin::APP_SERVICE)
        .unwrap();
    app.exposure = match rng.gen_range(0..3) {
        0 => Exposure::InternalOnly,
        1 => Exposure::NodePort { node_port: 30100 },
        _ => Exposure::NodePort { node_port: 31000 },
    };
    for ns in ["developer", "kafka"] {
        let used = f
            .pods
            .iter()
            .any(|p| p.namespace == ns && p.service_account == "default");
        if !used && rng.gen_bool(0.15) {
            f.service_accounts
                .retain(|sa| !(sa.namespace == ns && sa.name == "default"));
        }
    }

    if rng.gen_bool(0.5) {
        let mut second: Node = f.nodes[0].clone();
        second.name = "worker-2".into();
        second
            .host_files
            .insert("/etc/hostname".into(), "worker-2".into());
        f.nodes.push(second);
        let cred = f.node_credentials["worker-1"].clone();
        f.node_credentials.insert("worker-2".into(), cred);
        for pod in &mut f.pods {
            pod.node = if rng.gen_bool(0.5) {
                "worker-1"
            } else {
                "worker-2"
            }
            .into();
        }
        for node in &mut f.nodes {
            node.running_containers = f
                .pods
                .iter()
                .filter(|p| p.node == node.name)
                .map(|p| p.container_ref())
                .collect();
        }
    }

    f.validate_fixture()
        .unwrap_or_else(|e| panic!("generator produced an invalid fixture: {e}"));
    f
}

pub fn random_policy(rng: &mut impl Rng) -> PolicySet {
    let mut rules = Vec::new();
    if rng.gen_bool(0.35) {
        rules.push(builtin::namespace_scoped_rule());
    }
    if rng.gen_bool(0.35) {
        let allowed = ["dev-lead", builtin::CI_ADMIN]
            .into_iter()
            .filter(|_| rng.gen_bool(0.5))
            .map(String::from)
            .collect();
        rules.push(PolicyRule {
            id: "jenkins".into(),
            kind: RuleKind::JenkinsBuildEditRestriction {
                allowed_principals: allowed,
            },
        });
    }
    if rng.gen_bool(0.35) {
        let protected = [
            builtin::broker_service(),
            ServiceRef::new(builtin::APP_NAMESPACE, builtin::APP_SERVICE),
        ]
        .into_iter()
        .filter(|_| rng.gen_bool(0.6))
        .collect();
        let allowed = [
            builtin::NETOPS_SA,
            "system:serviceaccount:kafka:strimzi-cluster-operator",
        ]
        .into_iter()
        .filter(|_| rng.gen_bool(0.3))
        .map(String::from)
        .collect();
        rules.push(PolicyRule {
            id: "ingress".into(),
            kind: RuleKind::IngressObjectRestriction {
                protected_services: protected,
                allowed_principals: allowed,
            },
        });
    }
    if rng.gen_bool(0.35) {
        let mode = if rng.gen_bool(0.5) {
            HostPathMode::DenyAll
        } else {
            HostPathMode::AdminOnly
        };
        rules.push(PolicyRule {
            id: "hostpath".into(),
            kind: RuleKind::HostPathRestriction { mode },
        });
    }
    rules.shuffle(rng);
    PolicySet { rules }
}

/// Every capability that names an entity of `f`.
pub fn capability_universe(f: &ClusterState) -> Vec<Capability> {
    let mut out = vec![
        Capability::JenkinsEditAccess,
        Capability::InClusterNetwork,
        Capability::ClusterAdmin,
        Capability::CrossNamespaceDelete,
    ];
    for ns in &f.namespaces {
        out.push(Capability::DeployInNamespace(ns.clone()));
        out.push(Capability::CrudIn(ns.clone()));
        out.push(Capability::ShellInPod(ns.clone()));
    }
    for s in &f.services {
        out.push(Capability::IngressCreateOn(s.service_ref()));
        out.push(Capability::ExternalExposure(s.service_ref()));
    }
    for n in &f.nodes {
        out.push(Capability::NodeRoot(n.name.clone()));
    }
    for b in &f.brokers {
        out.extend(b.topics.keys().map(|t| Capability::TopicRead(t.clone())));
    }
    if let Some(ci) = &f.ci_server {
        out.extend(
            ci.jobs
                .keys()
                .map(|j| Capability::BackdooredImage(j.clone())),
        );
    }
    out
}

pub fn random_capabilities(rng: &mut impl Rng, f: &ClusterState) -> BTreeSet<Capability> {
    capability_universe(f)
        .into_iter()
        .filter(|_| rng.gen_bool(0.2))
        .collect()
}

pub fn image(s: &str) -> ImageRef {
    s.parse().unwrap()
}

use sscs_sim::action::{Action as Step, Session};
use sscs_sim::engine::apply_action;
use sscs_sim::explore::candidate_actions;
use sscs_sim::model::ClusterState as State;
use sscs_sim::network::Location;
use sscs_sim::rbac;

/// A random starting point: fixture, policy and an issued credential
/// somewhere on the network.
pub fn random_start(rng: &mut impl Rng) -> (State, PolicySet, Session) {
    let f = random_fixture(rng);
    let p = random_policy(rng);
    let issued: Vec<_> = f.issued_credentials().into_values().collect();
    let cred = issued.choose(rng).unwrap().clone();
    let location = match rng.gen_range(0..3) {
        0 => Location::External,
        1 => Location::in_cluster(f.namespaces.choose(rng).unwrap().clone()),
        _ => Location::on_node(f.nodes.choose(rng).unwrap().name.clone()),
    };
    (f, p, Session::new(cred, location))
}

/// Walks `len` steps, choosing among candidate actions and, half the time,
/// replaying a built-in scenario's steps first. Calls `check` before every
/// step with the pre-state and the action, then advances.
pub fn walk(
    seed: u64,
    len: usize,
    mut check: impl FnMut(&State, &Session, &Step, &PolicySet) -> Result<(), String>,
) -> Result<(), String> {
    let mut rng = rng(seed);
    let (mut state, policy, mut session) = random_start(&mut rng);
    let mut script: Vec<Step> = Vec::new();
    if rng.gen_bool(0.5) {
        let s = builtin::builtin_scenarios()
            .choose(&mut rng)
            .unwrap()
            .clone();
        if let Some(cred) = state.issued_credential(&s.prerequisite.principal) {
            session = Session::new(cred, Location::External);
            script = s.steps;
        }
    }
    script.reverse();
    for _ in 0..len {
        let action = match script.pop() {
            Some(a) => a,
            None => candidate_actions(&state, &session)
                .choose(&mut rng)
                .cloned()
                .expect("alphabet is never empty"),
        };
        check(&state, &session, &action, &policy)?;
        let t = apply_action(&state, &session, &action, &policy);
        state = t.state;
        session = t.session;
    }
    Ok(())
}

/// Atomicity, clock discipline and invariant preservation for one step.
pub fn check_step(
    state: &State,
    session: &Session,
    action: &Step,
    policy: &PolicySet,
) -> Result<(), String> {
    let t = apply_action(state, session, action, policy);
    if t.result.is_applied() {
        t.state
            .validate()
            .map_err(|e| format!("{action} broke an invariant: {e}"))?;
        if t.state.clock != state.clock + 1 {
            return Err(format!("{action}: clock did not advance by one"));
        }
    } else if t.state != *state || t.session != *session {
        return Err(format!("{action}: {:?} changed the world", t.result.status));
    }
    Ok(())
}

pub fn check_deterministic(
    state: &State,
    session: &Session,
    action: &Step,
    policy: &PolicySet,
) -> Result<(), String> {
    let a = apply_action(state, session, action, policy);
    let b = apply_action(state, session, action, policy);
    if a != b {
        return Err(format!("{action} is not deterministic"));
    }
    Ok(())
}

/// Adding any shipped rule never turns a non-applied result into an applied one.
pub fn check_monotone_restriction(
    state: &State,
    session: &Session,
    action: &Step,
    policy: &PolicySet,
) -> Result<(), String> {
    let loose = apply_action(state, session, action, policy)
        .result
        .is_applied();
    for rule in builtin::all_mitigations().rules {
        let strict = apply_action(state, session, action, &policy.with_rule(rule.clone()));
        if strict.result.is_applied() && !loose {
            return Err(format!("adding {} let {action} through", rule.id));
        }
    }
    Ok(())
}

/// Adding one random rule never flips an authorize result from true to false.
pub fn check_rbac_monotone(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let before = random_fixture(&mut rng);
    let mut after = before.clone();
    let principals: Vec<String> = before.issued_credentials().into_keys().collect();
    let principal = principals.choose(&mut rng).unwrap().clone();
    after
        .role_rules
        .push(random_rule(&mut rng, &principal, &before.namespaces));
    for cred in before.issued_credentials().values() {
        for verb in Verb::ALL {
            for kind in ResourceKind::ALL {
                for ns in &before.namespaces {
                    let was = rbac::authorize(&before, cred, verb, kind, ns).unwrap();
                    let now = rbac::authorize(&after, cred, verb, kind, ns).unwrap();
                    if was && !now {
                        return Err(format!("{} lost {verb} {kind} in {ns}", cred.subject));
                    }
                }
            }
        }
    }
    Ok(())
}
