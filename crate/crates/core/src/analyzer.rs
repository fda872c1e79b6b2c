//! Capability-level reachability over abstract transition rules.
//!
//! Rules are instantiated against a fixture, an actor and a policy. Only
//! instances whose guard holds are kept, so the closure is a plain monotone
//! fixed point over the surviving rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::action::{Action, Manifest, PodManifest, ServiceManifest, Session};
use crate::error::AnalysisError;
use crate::model::{
    ClusterState, Credential, CredentialLevel, ImageRef, ImageRole, PayloadEdit, ResourceKind,
    ServiceRef, Verb, Volume, HOST_ROOT, NODE_PORT_RANGE,
};
use crate::network::{reachable, Location};
use crate::policy::{PolicyDecision, PolicySet};
use crate::rbac;
use crate::scenario::{resolve_prerequisite, run_scenario, Goal, Scenario};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Capability {
    DeployInNamespace(String),
    JenkinsEditAccess,
    IngressCreateOn(ServiceRef),
    CrudIn(String),
    InClusterNetwork,
    ShellInPod(String),
    NodeRoot(String),
    ClusterAdmin,
    TopicRead(String),
    BackdooredImage(String),
    ExternalExposure(ServiceRef),
    CrossNamespaceDelete,
}

impl Capability {
    /// Every accepted spelling, for error messages.
    pub const FORMS: [&'static str; 12] = [
        "DeployInNamespace(<ns>)",
        "JenkinsEditAccess",
        "IngressCreateOn(<ns>/<service>)",
        "CrudIn(<ns>)",
        "InClusterNetwork",
        "ShellInPod(<ns>)",
        "NodeRoot(<node>)",
        "ClusterAdmin",
        "TopicRead(<topic>)",
        "BackdooredImage(<job>)",
        "ExternalExposure(<ns>/<service>)",
        "CrossNamespaceDelete",
    ];

    /// Checks that every parameter names something in the fixture.
    pub fn check_against(&self, fixture: &ClusterState) -> Result<(), String> {
        let ok = match self {
            Capability::DeployInNamespace(ns)
            | Capability::CrudIn(ns)
            | Capability::ShellInPod(ns) => fixture.has_namespace(ns),
            Capability::IngressCreateOn(s) | Capability::ExternalExposure(s) => {
                fixture.service_by_ref(s).is_some()
            }
            Capability::NodeRoot(n) => fixture.node(n).is_some(),
            Capability::TopicRead(t) => fixture.brokers.iter().any(|b| b.topics.contains_key(t)),
            Capability::BackdooredImage(job) => fixture
                .ci_server
                .as_ref()
                .is_some_and(|ci| ci.jobs.contains_key(job)),
            Capability::JenkinsEditAccess => fixture.ci_server.is_some(),
            Capability::InClusterNetwork
            | Capability::ClusterAdmin
            | Capability::CrossNamespaceDelete => true,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("`{self}` does not reference a fixture entity"))
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capability::DeployInNamespace(p) => write!(f, "DeployInNamespace({p})"),
            Capability::JenkinsEditAccess => f.write_str("JenkinsEditAccess"),
            Capability::IngressCreateOn(p) => write!(f, "IngressCreateOn({p})"),
            Capability::CrudIn(p) => write!(f, "CrudIn({p})"),
            Capability::InClusterNetwork => f.write_str("InClusterNetwork"),
            Capability::ShellInPod(p) => write!(f, "ShellInPod({p})"),
            Capability::NodeRoot(p) => write!(f, "NodeRoot({p})"),
            Capability::ClusterAdmin => f.write_str("ClusterAdmin"),
            Capability::TopicRead(p) => write!(f, "TopicRead({p})"),
            Capability::BackdooredImage(p) => write!(f, "BackdooredImage({p})"),
            Capability::ExternalExposure(p) => write!(f, "ExternalExposure({p})"),
            Capability::CrossNamespaceDelete => f.write_str("CrossNamespaceDelete"),
        }
    }
}

impl FromStr for Capability {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || AnalysisError::UnknownCapability {
            given: s.to_owned(),
            valid: Capability::FORMS.join(", "),
        };
        let s = s.trim();
        let (name, arg) = match s.split_once('(') {
            Some((name, rest)) => {
                let arg = rest.strip_suffix(')').ok_or_else(unknown)?.trim();
                if arg.is_empty() {
                    return Err(unknown());
                }
                (name.trim(), Some(arg.to_owned()))
            }
            None => (s, None),
        };
        let service = |a: String| a.parse::<ServiceRef>().map_err(|_| unknown());
        Ok(match (name, arg) {
            ("JenkinsEditAccess", None) => Capability::JenkinsEditAccess,
            ("InClusterNetwork", None) => Capability::InClusterNetwork,
            ("ClusterAdmin", None) => Capability::ClusterAdmin,
            ("CrossNamespaceDelete", None) => Capability::CrossNamespaceDelete,
            ("DeployInNamespace", Some(a)) => Capability::DeployInNamespace(a),
            ("CrudIn", Some(a)) => Capability::CrudIn(a),
            ("ShellInPod", Some(a)) => Capability::ShellInPod(a),
            ("NodeRoot", Some(a)) => Capability::NodeRoot(a),
            ("TopicRead", Some(a)) => Capability::TopicRead(a),
            ("BackdooredImage", Some(a)) => Capability::BackdooredImage(a),
            ("IngressCreateOn", Some(a)) => Capability::IngressCreateOn(service(a)?),
            ("ExternalExposure", Some(a)) => Capability::ExternalExposure(service(a)?),
            _ => return Err(unknown()),
        })
    }
}

impl From<Capability> for String {
    fn from(c: Capability) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for Capability {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse().map_err(|e: AnalysisError| e.to_string())
    }
}

/// An instantiated rule whose guard held for the fixture, actor and policy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransitionRule {
    pub id: String,
    pub requires: BTreeSet<Capability>,
    pub yields: Capability,
}

impl TransitionRule {
    fn new(id: String, requires: impl IntoIterator<Item = Capability>, yields: Capability) -> Self {
        let requires: BTreeSet<_> = requires.into_iter().collect();
        debug_assert!(!requires.contains(&yields));
        TransitionRule {
            id,
            requires,
            yields,
        }
    }
}

/// Where the analysis starts: who the attacker is and what they can do.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Foothold {
    /// Credential whose identity policy guards are evaluated against. When
    /// absent, a credential-less outside attacker is assumed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<Credential>,
    pub capabilities: BTreeSet<Capability>,
}

impl Foothold {
    pub fn new(capabilities: impl IntoIterator<Item = Capability>) -> Self {
        Foothold {
            actor: None,
            capabilities: capabilities.into_iter().collect(),
        }
    }

    pub fn with_actor(mut self, actor: Credential) -> Self {
        self.actor = Some(actor);
        self
    }

    fn actor_credential(&self) -> Credential {
        self.actor
            .clone()
            .unwrap_or_else(|| Credential::new("attacker", CredentialLevel::User))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscalationGraph {
    pub initial: BTreeSet<Capability>,
    pub nodes: BTreeSet<Capability>,
    /// Rules that fire within the closure.
    pub edges: Vec<TransitionRule>,
    /// Per reached capability, a minimal ordered rule path from the initial set.
    pub witness: BTreeMap<Capability, Vec<String>>,
}

impl EscalationGraph {
    pub fn reaches(&self, cap: &Capability) -> bool {
        self.nodes.contains(cap)
    }

    /// Capabilities reached that were not in the initial set.
    pub fn gains(&self) -> impl Iterator<Item = &Capability> {
        self.nodes.iter().filter(|c| !self.initial.contains(*c))
    }

    /// Replays the witness for `cap`: every rule must be enabled by what was
    /// reached before it, and the last one must yield `cap`.
    pub fn witness_is_valid(&self, cap: &Capability) -> bool {
        let Some(path) = self.witness.get(cap) else {
            return false;
        };
        let by_id: BTreeMap<&str, &TransitionRule> =
            self.edges.iter().map(|r| (r.id.as_str(), r)).collect();
        let mut reached = self.initial.clone();
        for id in path {
            let Some(rule) = by_id.get(id.as_str()) else {
                return false;
            };
            if !rule.requires.is_subset(&reached) {
                return false;
            }
            reached.insert(rule.yields.clone());
        }
        reached.contains(cap)
    }
}

/// Instantiates every rule template whose guard holds.
pub fn instantiate_rules(
    fixture: &ClusterState,
    actor: &Credential,
    policy: &PolicySet,
) -> Vec<TransitionRule> {
    let session = Session::new(actor.clone(), Location::External);
    let passes = |s: &Session, a: &Action| policy.evaluate(fixture, s, a) == PolicyDecision::Pass;
    let free_port = NODE_PORT_RANGE
        .clone()
        .find(|p| !fixture.node_port_in_use(*p, None));
    let default_node = fixture.default_node().map(|n| n.name.clone());
    let any_image = fixture.registry.images.keys().next().cloned();
    let relay_image = fixture
        .registry
        .images
        .iter()
        .find(|(_, i)| i.role == ImageRole::Relay)
        .map(|(r, _)| r.clone());
    let mut rules = Vec::new();

    for ns in &fixture.namespaces {
        let schedulable =
            fixture.service_account(ns, "default").is_some() && default_node.is_some();
        if !schedulable {
            continue;
        }
        if let (Some(image), Some(port)) = (&relay_image, free_port) {
            let (pod, svc) = relay_manifests(ns, image, port);
            if passes(&session, &apply(Manifest::Pod(pod)))
                && passes(&session, &apply(Manifest::Service(svc)))
            {
                rules.push(TransitionRule::new(
                    format!("deploy-relay[{ns}]"),
                    [Capability::DeployInNamespace(ns.clone())],
                    Capability::InClusterNetwork,
                ));
            }
        }
        let Some(image) = &any_image else { continue };
        let plain = PodManifest::new("shell", ns, image.clone());
        if !passes(&session, &apply(Manifest::Pod(plain.clone()))) {
            continue;
        }
        rules.push(TransitionRule::new(
            format!("exec-into-pod[{ns}]"),
            [Capability::CrudIn(ns.clone())],
            Capability::ShellInPod(ns.clone()),
        ));
        let escape = plain.volume(Volume::host_path(HOST_ROOT, "/host"));
        if passes(&session, &apply(Manifest::Pod(escape))) {
            let node = default_node.clone().expect("schedulable");
            rules.push(TransitionRule::new(
                format!("hostpath-breakout[{ns}]"),
                [
                    Capability::ShellInPod(ns.clone()),
                    Capability::CrudIn(ns.clone()),
                ],
                Capability::NodeRoot(node),
            ));
        }
    }

    for node in &fixture.nodes {
        let admin = fixture
            .node_credentials
            .get(&node.name)
            .is_some_and(|c| c.level == CredentialLevel::ClusterAdmin);
        if admin && node.kubeconfig_paths().next().is_some() {
            rules.push(TransitionRule::new(
                format!("node-kubeconfig[{}]", node.name),
                [Capability::NodeRoot(node.name.clone())],
                Capability::ClusterAdmin,
            ));
        }
    }

    let home = actor.home_namespace();
    if fixture
        .pods
        .iter()
        .any(|p| Some(p.namespace.as_str()) != home)
    {
        rules.push(TransitionRule::new(
            "admin-delete".into(),
            [Capability::ClusterAdmin],
            Capability::CrossNamespaceDelete,
        ));
    }

    for svc in &fixture.services {
        let sref = svc.service_ref();
        if let Some(port) = free_port {
            let add = Action::AddNodePort {
                service: sref.name.clone(),
                namespace: sref.namespace.clone(),
                node_port: port,
            };
            if passes(&session, &add) {
                rules.push(TransitionRule::new(
                    format!("add-nodeport[{sref}]"),
                    [Capability::IngressCreateOn(sref.clone())],
                    Capability::ExternalExposure(sref.clone()),
                ));
            }
        }
    }

    for broker in &fixture.brokers {
        if fixture.service_by_ref(&broker.service).is_none() {
            continue;
        }
        let sref = &broker.service;
        for topic in broker.topics.keys() {
            let read = Capability::TopicRead(topic.clone());
            rules.push(TransitionRule::new(
                format!("consume-in-cluster[{sref}:{topic}]"),
                [Capability::InClusterNetwork],
                read.clone(),
            ));
            rules.push(TransitionRule::new(
                format!("consume-exposed[{sref}:{topic}]"),
                [Capability::ExternalExposure(sref.clone())],
                read,
            ));
        }
    }

    if let Some(ci) = &fixture.ci_server {
        for (name, job) in &ci.jobs {
            let edit = Action::EditBuildStep {
                job: name.clone(),
                step_index: 0,
                script: "true".into(),
                payload: Some(PayloadEdit {
                    route: "/".into(),
                    disclosed_file: String::new(),
                }),
            };
            let repo_ok = fixture
                .source_repo
                .as_ref()
                .is_some_and(|r| r.name == job.source_ref);
            if !repo_ok || !passes(&session, &edit) {
                continue;
            }
            let mut external = false;
            let mut internal = false;
            for pod in fixture
                .pods
                .iter()
                .filter(|p| p.image.name == job.output_image_name)
            {
                let deployable = ci.stored_credentials.iter().any(|c| {
                    let deployer = Session::new(c.clone(), Location::External);
                    let deploy = Action::DeployImage {
                        pod: pod.name.clone(),
                        namespace: pod.namespace.clone(),
                        image: ImageRef::new(&job.output_image_name, "next"),
                    };
                    rbac::allowed(fixture, c, Verb::Update, ResourceKind::Pod, &pod.namespace)
                        && passes(&deployer, &deploy)
                });
                if !deployable {
                    continue;
                }
                for svc in fixture
                    .services
                    .iter()
                    .filter(|s| fixture.backing_pod(s) == Some(pod))
                {
                    internal = true;
                    external |= reachable(&Location::External, svc);
                }
            }
            let yields = Capability::BackdooredImage(name.clone());
            if external {
                rules.push(TransitionRule::new(
                    format!("backdoor-build[{name}]"),
                    [Capability::JenkinsEditAccess],
                    yields.clone(),
                ));
            }
            if internal {
                rules.push(TransitionRule::new(
                    format!("backdoor-build-internal[{name}]"),
                    [Capability::JenkinsEditAccess, Capability::InClusterNetwork],
                    yields,
                ));
            }
        }
    }

    rules
}

fn apply(manifest: Manifest) -> Action {
    Action::KubectlApply { manifest }
}

fn relay_manifests(ns: &str, image: &ImageRef, node_port: u16) -> (PodManifest, ServiceManifest) {
    let pod = PodManifest::new("relay", ns, image.clone()).label("app", "relay");
    let svc = ServiceManifest {
        name: "relay".into(),
        namespace: ns.into(),
        selector: pod.labels.clone(),
        port: 5000,
        node_port: Some(node_port),
    };
    (pod, svc)
}

/// Sort key for candidate witnesses: fewest rules, then lexicographic ids.
fn better(candidate: &BTreeSet<String>, incumbent: &BTreeSet<String>) -> bool {
    (candidate.len(), candidate) < (incumbent.len(), incumbent)
}

pub fn analyze(fixture: &ClusterState, foothold: &Foothold, policy: &PolicySet) -> EscalationGraph {
    let rules = instantiate_rules(fixture, &foothold.actor_credential(), policy);
    let mut best: BTreeMap<Capability, BTreeSet<String>> = foothold
        .capabilities
        .iter()
        .map(|c| (c.clone(), BTreeSet::new()))
        .collect();

    // Relax until no capability gains a smaller rule set. Every update is a
    // strict decrease in a well-order over finitely many sets, so this stops.
    loop {
        let mut changed = false;
        for rule in &rules {
            if foothold.capabilities.contains(&rule.yields) {
                continue;
            }
            let Some(mut candidate) =
                rule.requires
                    .iter()
                    .try_fold(BTreeSet::new(), |mut acc, r| {
                        acc.extend(best.get(r)?.iter().cloned());
                        Some(acc)
                    })
            else {
                continue;
            };
            candidate.insert(rule.id.clone());
            match best.get(&rule.yields) {
                Some(current) if !better(&candidate, current) => {}
                _ => {
                    best.insert(rule.yields.clone(), candidate);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let nodes: BTreeSet<Capability> = best.keys().cloned().collect();
    let edges: Vec<TransitionRule> = rules
        .iter()
        .filter(|r| r.requires.is_subset(&nodes))
        .cloned()
        .collect();
    let witness = best
        .into_iter()
        .map(|(cap, set)| {
            let path = order_witness(&foothold.capabilities, &rules, set);
            (cap, path)
        })
        .collect();
    EscalationGraph {
        initial: foothold.capabilities.clone(),
        nodes,
        edges,
        witness,
    }
}

/// Orders a rule set so each rule is enabled by its predecessors, picking the
/// lexicographically smallest enabled id at every step.
fn order_witness(
    initial: &BTreeSet<Capability>,
    rules: &[TransitionRule],
    mut set: BTreeSet<String>,
) -> Vec<String> {
    let by_id: BTreeMap<&str, &TransitionRule> = rules.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut reached = initial.clone();
    let mut path = Vec::with_capacity(set.len());
    while let Some(next) = set
        .iter()
        .find(|id| by_id[id.as_str()].requires.is_subset(&reached))
        .cloned()
    {
        reached.insert(by_id[next.as_str()].yields.clone());
        set.remove(&next);
        path.push(next);
    }
    debug_assert!(set.is_empty(), "witness set is not self-enabling");
    path
}

/// The capabilities a scenario's opening steps exercise.
///
/// Only steps run under the prerequisite credential count, up to the first
/// `Authenticate`. If that credential lacks any permission those steps need,
/// the foothold is empty.
pub fn scenario_foothold(
    fixture: &ClusterState,
    scenario: &Scenario,
) -> Result<Foothold, AnalysisError> {
    let session = resolve_prerequisite(fixture, &scenario.prerequisite)?;
    let actor = session.credential;
    let own_steps: Vec<&Action> = scenario
        .steps
        .iter()
        .take_while(|a| !matches!(a, Action::Authenticate { .. }))
        .collect();
    let permitted = own_steps.iter().all(|a| {
        a.rbac_checks().iter().all(|c| match &c.namespace {
            Some(ns) => rbac::allowed(fixture, &actor, c.verb, c.kind, ns),
            None => fixture
                .namespaces
                .iter()
                .all(|ns| rbac::allowed(fixture, &actor, c.verb, c.kind, ns)),
        })
    });
    let mut foothold = Foothold::default().with_actor(actor.clone());
    if !permitted {
        return Ok(foothold);
    }
    let caps = &mut foothold.capabilities;
    if session.location.is_internal() {
        caps.insert(Capability::InClusterNetwork);
    }
    for action in own_steps {
        match action {
            Action::KubectlApply {
                manifest: Manifest::Pod(p),
            } => {
                if p.volumes.iter().any(Volume::is_host_path) {
                    caps.insert(Capability::CrudIn(p.namespace.clone()));
                }
                let relay = fixture
                    .registry
                    .images
                    .get(&p.image)
                    .is_some_and(|i| i.role == ImageRole::Relay);
                if relay {
                    caps.insert(Capability::DeployInNamespace(p.namespace.clone()));
                }
            }
            Action::AddNodePort {
                service, namespace, ..
            } => {
                caps.insert(Capability::IngressCreateOn(ServiceRef::new(
                    namespace, service,
                )));
            }
            Action::JenkinsLogin { user } => {
                let registered = fixture
                    .ci_server
                    .as_ref()
                    .and_then(|ci| ci.user(user))
                    .is_some_and(|u| u.credential == actor);
                if registered {
                    caps.insert(Capability::JenkinsEditAccess);
                }
            }
            _ => {}
        }
    }
    Ok(foothold)
}

/// Capabilities that together stand for the scenario's goal.
pub fn goal_capabilities(scenario: &Scenario) -> Result<BTreeSet<Capability>, AnalysisError> {
    fn walk(
        scenario: &Scenario,
        goal: &Goal,
        out: &mut BTreeSet<Capability>,
    ) -> Result<(), String> {
        match goal {
            Goal::TopicDataRead { topic } => {
                out.insert(Capability::TopicRead(topic.clone()));
            }
            Goal::PayloadRouteServed { path, .. } => {
                let job = scenario
                    .steps
                    .iter()
                    .find_map(|a| match a {
                        Action::EditBuildStep {
                            job,
                            payload: Some(p),
                            ..
                        } if &p.route == path => Some(job.clone()),
                        _ => None,
                    })
                    .ok_or_else(|| format!("no build edit installs route `{path}`"))?;
                out.insert(Capability::BackdooredImage(job));
            }
            Goal::ExternallyReachable { service } => {
                out.insert(Capability::ExternalExposure(service.clone()));
            }
            Goal::ClusterAdminObtained => {
                out.insert(Capability::ClusterAdmin);
            }
            Goal::CrossNamespacePodDeleted => {
                out.insert(Capability::CrossNamespaceDelete);
            }
            Goal::ObservationContains { .. } => {
                return Err("free-form observation goals have no capability".into())
            }
            Goal::AllOf { goals } => {
                for g in goals {
                    walk(scenario, g, out)?;
                }
            }
        }
        Ok(())
    }
    let mut out = BTreeSet::new();
    walk(scenario, &scenario.goal, &mut out).map_err(|reason| AnalysisError::Unsupported {
        scenario: scenario.id.clone(),
        reason,
    })?;
    Ok(out)
}

/// Analysis of one scenario next to the simulator's verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioAnalysis {
    pub scenario_id: String,
    pub foothold: Foothold,
    pub goal: BTreeSet<Capability>,
    pub graph: EscalationGraph,
    pub goal_reachable: bool,
    pub simulator_achieved: bool,
    pub agrees: bool,
}

pub fn analyze_scenario(
    fixture: &ClusterState,
    scenario: &Scenario,
    policy: &PolicySet,
) -> Result<ScenarioAnalysis, AnalysisError> {
    let goal = goal_capabilities(scenario)?;
    let foothold = scenario_foothold(fixture, scenario)?;
    let graph = analyze(fixture, &foothold, policy);
    let goal_reachable = goal.is_subset(&graph.nodes);
    let simulator_achieved = run_scenario(fixture, scenario, policy)?
        .outcome
        .is_achieved();
    Ok(ScenarioAnalysis {
        scenario_id: scenario.id.clone(),
        foothold,
        goal,
        graph,
        goal_reachable,
        simulator_achieved,
        agrees: goal_reachable == simulator_achieved,
    })
}

pub fn agrees_with_simulator(
    fixture: &ClusterState,
    scenario: &Scenario,
    policy: &PolicySet,
) -> Result<bool, AnalysisError> {
    analyze_scenario(fixture, scenario, policy).map(|a| a.agrees)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{self, canonical_fixture};

    fn caps(list: &[&str]) -> BTreeSet<Capability> {
        list.iter().map(|s| s.parse().unwrap()).collect()
    }

    #[test]
    fn display_and_parse_round_trip() {
        for s in [
            "DeployInNamespace(kafka)",
            "JenkinsEditAccess",
            "IngressCreateOn(kafka/strimzi-service)",
            "NodeRoot(worker-1)",
            "CrossNamespaceDelete",
        ] {
            assert_eq!(s.parse::<Capability>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn unknown_capability_lists_valid_names() {
        let err = "RootEverywhere".parse::<Capability>().unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("RootEverywhere") && msg.contains("ClusterAdmin"),
            "{msg}"
        );
        assert!("CrudIn()".parse::<Capability>().is_err());
        assert!("ClusterAdmin(x)".parse::<Capability>().is_err());
        assert!("IngressCreateOn(nope)".parse::<Capability>().is_err());
    }

    #[test]
    fn crud_to_cluster_admin_in_three_rules() {
        let fixture = canonical_fixture();
        let foothold = Foothold::new(caps(&["CrudIn(developer)", "InClusterNetwork"]));
        let g = analyze(&fixture, &foothold, &PolicySet::empty());
        assert_eq!(
            g.witness[&Capability::ClusterAdmin],
            [
                "exec-into-pod[developer]",
                "hostpath-breakout[developer]",
                "node-kubeconfig[worker-1]"
            ]
        );
        assert!(g.witness_is_valid(&Capability::ClusterAdmin));
    }

    #[test]
    fn host_path_restriction_cuts_the_breakout() {
        let fixture = canonical_fixture();
        let foothold = Foothold::new(caps(&["CrudIn(developer)", "InClusterNetwork"]));
        let policy = PolicySet::single(builtin::host_path_rule());
        let g = analyze(&fixture, &foothold, &policy);
        assert!(!g.reaches(&Capability::ClusterAdmin));
        assert!(g.reaches(&Capability::ShellInPod("developer".into())));
    }

    #[test]
    fn empty_start_has_empty_closure() {
        let g = analyze(
            &canonical_fixture(),
            &Foothold::default(),
            &PolicySet::empty(),
        );
        assert!(g.nodes.is_empty() && g.edges.is_empty() && g.witness.is_empty());
    }

    #[test]
    fn yields_never_required() {
        let f = canonical_fixture();
        let actor = Credential::new("attacker", CredentialLevel::User);
        for r in instantiate_rules(&f, &actor, &PolicySet::empty()) {
            assert!(!r.requires.contains(&r.yields), "{}", r.id);
        }
    }

    #[test]
    fn free_form_goal_is_unsupported() {
        let mut s = builtin::builtin_scenarios().remove(0);
        s.goal = Goal::ObservationContains { text: "x".into() };
        let err = agrees_with_simulator(&canonical_fixture(), &s, &PolicySet::empty()).unwrap_err();
        assert!(matches!(err, AnalysisError::Unsupported { .. }), "{err}");
    }

    #[test]
    fn builtin_footholds() {
        let f = canonical_fixture();
        let got: Vec<BTreeSet<Capability>> = builtin::builtin_scenarios()
            .iter()
            .map(|s| scenario_foothold(&f, s).unwrap().capabilities)
            .collect();
        assert_eq!(got[0], caps(&["DeployInNamespace(kafka)"]));
        assert_eq!(got[1], caps(&["JenkinsEditAccess"]));
        assert_eq!(got[2], caps(&["IngressCreateOn(kafka/strimzi-service)"]));
        assert_eq!(got[3], caps(&["CrudIn(developer)"]));
    }
}
