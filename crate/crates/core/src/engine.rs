//! Typed state transitions for every action in the alphabet.
//!
//! [`apply_action`] is the only mutation path. Gates run in a fixed order:
//! policy, then RBAC, then per-kind preconditions. Effects are computed on a
//! copy of the state and session, so a result other than `Applied` hands back
//! the inputs untouched. The clock advances once per applied action.

use crate::action::{
    list_resources, Action, ActionResult, Manifest, Observation, PodManifest, ServiceManifest,
    Session, Shell, Status, TraceEntry,
};
use crate::model::{
    BuildStep, ClusterState, CredentialLevel, Exposure, Image, ImageRef, ImageRole, PayloadEdit,
    Pod, Service, ServiceRef, NODE_PORT_RANGE,
};
use crate::network::{reachable, Endpoint, Location};
use crate::policy::{PolicyDecision, PolicySet};
use crate::rbac;

/// The outcome of one call to [`apply_action`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub state: ClusterState,
    pub session: Session,
    pub result: ActionResult,
}

pub fn apply_action(
    state: &ClusterState,
    session: &Session,
    action: &Action,
    policy: &PolicySet,
) -> Transition {
    let unchanged = |status: Status| Transition {
        state: state.clone(),
        session: session.clone(),
        result: ActionResult::not_applied(status),
    };

    if let PolicyDecision::Block(rule_id) = policy.evaluate(state, session, action) {
        return unchanged(Status::BlockedPolicy { rule_id });
    }

    for check in action.rbac_checks() {
        let namespaces: Vec<&str> = match &check.namespace {
            Some(ns) => vec![ns.as_str()],
            None => state.namespaces.iter().map(String::as_str).collect(),
        };
        for ns in namespaces {
            match rbac::authorize(state, &session.credential, check.verb, check.kind, ns) {
                Ok(true) => {}
                Ok(false) => {
                    return unchanged(Status::DeniedRbac {
                        principal: session.credential.subject.clone(),
                        verb: check.verb,
                        kind: check.kind,
                        namespace: ns.to_owned(),
                    })
                }
                Err(e) => {
                    return unchanged(Status::FailedPrecondition {
                        reason: e.to_string(),
                    })
                }
            }
        }
    }

    let mut next_state = state.clone();
    let mut next_session = session.clone();
    match effect(&mut next_state, &mut next_session, action) {
        Ok(observation) => {
            for cred in observation.credentials() {
                next_session.wallet.insert(cred.clone());
            }
            next_state.clock += 1;
            Transition {
                state: next_state,
                session: next_session,
                result: ActionResult::applied(observation),
            }
        }
        Err(reason) => unchanged(Status::FailedPrecondition { reason }),
    }
}

type Effect = Result<Observation, String>;

fn effect(state: &mut ClusterState, session: &mut Session, action: &Action) -> Effect {
    match action {
        Action::Authenticate { subject } => authenticate(state, session, subject),
        Action::KubectlApply {
            manifest: Manifest::Pod(pod),
        } => create_pod(state, pod),
        Action::KubectlApply {
            manifest: Manifest::Service(svc),
        } => create_service(state, svc),
        Action::KubectlGet { kind, namespace } => {
            if let Some(ns) = namespace {
                if !state.has_namespace(ns) {
                    return Err(format!("namespace `{ns}` not found"));
                }
            }
            Ok(Observation::Resources {
                names: list_resources(state, *kind, namespace.as_deref()),
            })
        }
        Action::KubectlExec { pod, namespace } => exec(state, session, pod, namespace),
        Action::ChrootEscape => chroot(state, session),
        Action::ReadNodeKubeconfig => read_kubeconfig(state, session),
        Action::AddNodePort {
            service,
            namespace,
            node_port,
        } => add_node_port(state, &ServiceRef::new(namespace, service), *node_port),
        Action::Connect { service, namespace } => {
            connect(state, session, &ServiceRef::new(namespace, service))
        }
        Action::ConsumeTopic {
            service,
            namespace,
            topic,
        } => {
            let svc = reachable_service(state, session, &ServiceRef::new(namespace, service))?;
            let broker = state
                .broker_behind(&svc)
                .ok_or_else(|| format!("no broker behind `{svc}`"))?;
            let records = broker
                .topics
                .get(topic)
                .ok_or_else(|| format!("unknown topic `{topic}`"))?;
            Ok(Observation::Records {
                topic: topic.clone(),
                records: records.clone(),
            })
        }
        Action::ProduceTopic {
            service,
            namespace,
            topic,
            record,
        } => {
            let svc = reachable_service(state, session, &ServiceRef::new(namespace, service))?;
            let broker = state
                .broker_behind_mut(&svc)
                .ok_or_else(|| format!("no broker behind `{svc}`"))?;
            let records = broker
                .topics
                .get_mut(topic)
                .ok_or_else(|| format!("unknown topic `{topic}`"))?;
            records.push(record.clone());
            Ok(Observation::Produced {
                topic: topic.clone(),
                offset: records.len() - 1,
            })
        }
        Action::JenkinsLogin { user } => jenkins_login(state, session, user),
        Action::EditBuildStep {
            job,
            step_index,
            script,
            payload,
        } => edit_step(state, session, job, *step_index, script, payload.as_ref()),
        Action::RunBuild { job } => build(state, session, job),
        Action::PullImage { image } => {
            let img = state
                .registry
                .images
                .get(image)
                .ok_or_else(|| format!("image `{image}` not found"))?;
            Ok(Observation::Image {
                image: image.clone(),
                payload_routes: img.payload_routes.clone(),
            })
        }
        Action::DeployImage {
            pod,
            namespace,
            image,
        } => {
            if !state.registry.images.contains_key(image) {
                return Err(format!("image `{image}` not found"));
            }
            let target = state
                .pods
                .iter_mut()
                .find(|p| &p.namespace == namespace && &p.name == pod)
                .ok_or_else(|| format!("pod `{namespace}/{pod}` not found"))?;
            target.image = image.clone();
            target.ready = true;
            Ok(Observation::Deployed {
                namespace: namespace.clone(),
                pod: pod.clone(),
                image: image.clone(),
            })
        }
        Action::TriggerPayloadRoute {
            service,
            namespace,
            path,
        } => trigger_route(state, session, &ServiceRef::new(namespace, service), path),
        Action::DeletePod { pod, namespace } => {
            let idx = state
                .pods
                .iter()
                .position(|p| &p.namespace == namespace && &p.name == pod)
                .ok_or_else(|| format!("pod `{namespace}/{pod}` not found"))?;
            let removed = state.pods.remove(idx);
            let cref = removed.container_ref();
            if let Some(node) = state.nodes.iter_mut().find(|n| n.name == removed.node) {
                node.running_containers.retain(|c| c != &cref);
            }
            Ok(Observation::Deleted {
                namespace: namespace.clone(),
                pod: pod.clone(),
            })
        }
    }
}

fn authenticate(state: &ClusterState, session: &mut Session, subject: &str) -> Effect {
    let cred = session
        .holds(subject)
        .cloned()
        .ok_or_else(|| format!("no credential held for `{subject}`"))?;
    if !state.is_issued(&cred) {
        return Err(format!("credential for `{subject}` is not recognised"));
    }
    session.credential = cred.clone();
    Ok(Observation::Authenticated { credential: cred })
}

fn create_pod(state: &mut ClusterState, m: &PodManifest) -> Effect {
    if m.name.is_empty() {
        return Err("pod manifest has an empty name".into());
    }
    if !state.has_namespace(&m.namespace) {
        return Err(format!("namespace `{}` not found", m.namespace));
    }
    if state.pod(&m.namespace, &m.name).is_some() {
        return Err(format!("pod `{}/{}` already exists", m.namespace, m.name));
    }
    if state
        .service_account(&m.namespace, &m.service_account)
        .is_none()
    {
        return Err(format!(
            "service account `{}` not found in `{}`",
            m.service_account, m.namespace
        ));
    }
    if !state.registry.images.contains_key(&m.image) {
        return Err(format!("image `{}` not found", m.image));
    }
    if let Some(v) = m.volumes.iter().find(|v| match &v.kind {
        crate::model::VolumeKind::HostPath { host_directory } => !host_directory.starts_with('/'),
        crate::model::VolumeKind::Ephemeral => false,
    }) {
        return Err(format!("hostPath for `{}` is not absolute", v.mount_point));
    }
    let node = match &m.node {
        Some(n) => state
            .node(n)
            .ok_or_else(|| format!("node `{n}` not found"))?
            .name
            .clone(),
        None => state
            .default_node()
            .ok_or("no schedulable node")?
            .name
            .clone(),
    };
    let pod = Pod {
        name: m.name.clone(),
        namespace: m.namespace.clone(),
        node: node.clone(),
        service_account: m.service_account.clone(),
        labels: m.labels.clone(),
        volumes: m.volumes.clone(),
        image: m.image.clone(),
        ready: true,
    };
    let cref = pod.container_ref();
    state.pods.push(pod);
    if let Some(n) = state.nodes.iter_mut().find(|n| n.name == node) {
        n.running_containers.push(cref);
    }
    Ok(Observation::Created {
        kind: crate::model::ResourceKind::Pod,
        namespace: m.namespace.clone(),
        name: m.name.clone(),
    })
}

fn check_node_port(state: &ClusterState, port: u16, owner: &ServiceRef) -> Result<(), String> {
    if !NODE_PORT_RANGE.contains(&port) {
        return Err(format!(
            "nodePort {port} outside {}-{}",
            NODE_PORT_RANGE.start(),
            NODE_PORT_RANGE.end()
        ));
    }
    if state.node_port_in_use(port, Some(owner)) {
        return Err(format!("nodePort {port} already allocated"));
    }
    Ok(())
}

fn create_service(state: &mut ClusterState, m: &ServiceManifest) -> Effect {
    if m.name.is_empty() {
        return Err("service manifest has an empty name".into());
    }
    if !state.has_namespace(&m.namespace) {
        return Err(format!("namespace `{}` not found", m.namespace));
    }
    if state.service(&m.namespace, &m.name).is_some() {
        return Err(format!(
            "service `{}/{}` already exists",
            m.namespace, m.name
        ));
    }
    if m.port == 0 {
        return Err("service port must be non-zero".into());
    }
    let sref = ServiceRef::new(&m.namespace, &m.name);
    if let Some(port) = m.node_port {
        check_node_port(state, port, &sref)?;
    }
    let svc = Service {
        name: m.name.clone(),
        namespace: m.namespace.clone(),
        selector: m.selector.clone(),
        cluster_ip: state.next_cluster_ip(),
        port: m.port,
        exposure: m.exposure(),
    };
    state.services.push(svc);
    Ok(Observation::Created {
        kind: crate::model::ResourceKind::Service,
        namespace: m.namespace.clone(),
        name: m.name.clone(),
    })
}

fn exec(state: &ClusterState, session: &mut Session, pod: &str, namespace: &str) -> Effect {
    let p = state
        .pod(namespace, pod)
        .ok_or_else(|| format!("pod `{namespace}/{pod}` not found"))?;
    if !p.ready {
        return Err(format!("pod `{namespace}/{pod}` is not ready"));
    }
    session.location = Location::in_cluster(namespace);
    session.open_shell = Some(Shell::Pod {
        namespace: namespace.to_owned(),
        name: pod.to_owned(),
    });
    Ok(Observation::PodShell {
        namespace: namespace.to_owned(),
        pod: pod.to_owned(),
        node: p.node.clone(),
    })
}

fn chroot(state: &ClusterState, session: &mut Session) -> Effect {
    let Some(Shell::Pod { namespace, name }) = &session.open_shell else {
        return Err("no shell open in a pod".into());
    };
    let pod = state
        .pod(namespace, name)
        .ok_or_else(|| format!("pod `{namespace}/{name}` no longer exists"))?;
    if !pod.mounts_host_root() {
        return Err("no escape volume".into());
    }
    let node = state
        .node(&pod.node)
        .ok_or_else(|| format!("node `{}` not found", pod.node))?;
    session.location = Location::on_node(&node.name);
    session.open_shell = Some(Shell::Node {
        node: node.name.clone(),
    });
    Ok(Observation::NodeShell {
        node: node.name.clone(),
        level: CredentialLevel::NodeRoot,
        host_files: node.host_files.keys().cloned().collect(),
        running_containers: node.running_containers.clone(),
    })
}

fn read_kubeconfig(state: &ClusterState, session: &Session) -> Effect {
    let (Location::OnNode { node }, Some(Shell::Node { .. })) =
        (&session.location, &session.open_shell)
    else {
        return Err("not on a node".into());
    };
    let host = state
        .node(node)
        .ok_or_else(|| format!("node `{node}` not found"))?;
    let path = host
        .kubeconfig_paths()
        .next()
        .ok_or_else(|| format!("no kubeconfig on `{node}`"))?
        .to_owned();
    let credential = state
        .node_credentials
        .get(node)
        .cloned()
        .ok_or_else(|| format!("no kubeconfig credential on `{node}`"))?;
    Ok(Observation::Kubeconfig { path, credential })
}

fn add_node_port(state: &mut ClusterState, sref: &ServiceRef, port: u16) -> Effect {
    if state.service_by_ref(sref).is_none() {
        return Err(format!("service `{sref}` not found"));
    }
    check_node_port(state, port, sref)?;
    let svc = state
        .services
        .iter_mut()
        .find(|s| s.service_ref() == *sref)
        .expect("checked above");
    svc.exposure = Exposure::NodePort { node_port: port };
    Ok(Observation::Endpoint {
        endpoint: Endpoint::of(svc),
        relayed: false,
    })
}

fn reachable_service(
    state: &ClusterState,
    session: &Session,
    sref: &ServiceRef,
) -> Result<ServiceRef, String> {
    let svc = state
        .service_by_ref(sref)
        .ok_or_else(|| format!("service `{sref}` not found"))?;
    if !reachable(&session.location, svc) {
        return Err(format!("service `{sref}` unreachable from caller"));
    }
    Ok(svc.service_ref())
}

fn connect(state: &ClusterState, session: &mut Session, sref: &ServiceRef) -> Effect {
    reachable_service(state, session, sref)?;
    let svc = state.service_by_ref(sref).expect("checked above");
    let relay = state.backing_pod(svc).is_some_and(|p| {
        state
            .registry
            .images
            .get(&p.image)
            .is_some_and(|i| i.role == ImageRole::Relay)
    });
    let relayed = relay && session.location == Location::External;
    if relayed {
        session.location = Location::in_cluster(&svc.namespace);
    }
    Ok(Observation::Endpoint {
        endpoint: Endpoint::of(svc),
        relayed,
    })
}

fn require_ci_user(state: &ClusterState, session: &Session) -> Result<(), String> {
    let ci = state.ci_server.as_ref().ok_or("no CI server")?;
    let cred = &session.credential;
    if cred.level != CredentialLevel::JenkinsUser || !ci.users.iter().any(|u| &u.credential == cred)
    {
        return Err("session is not logged in to the CI server".into());
    }
    Ok(())
}

fn jenkins_login(state: &ClusterState, session: &mut Session, user: &str) -> Effect {
    let ci = state.ci_server.as_ref().ok_or("no CI server")?;
    let account = ci
        .user(user)
        .ok_or_else(|| format!("unknown CI user `{user}`"))?;
    if !session.wallet.contains(&account.credential) {
        return Err(format!("no credential held for CI user `{user}`"));
    }
    session.credential = account.credential.clone();
    Ok(Observation::CiLogin {
        user: user.to_owned(),
        stored_credentials: ci.stored_credentials.clone(),
    })
}

fn edit_step(
    state: &mut ClusterState,
    session: &Session,
    job: &str,
    step_index: usize,
    script: &str,
    payload: Option<&PayloadEdit>,
) -> Effect {
    require_ci_user(state, session)?;
    if script.is_empty() {
        return Err("build step script is empty".into());
    }
    let ci = state
        .ci_server
        .as_mut()
        .expect("checked by require_ci_user");
    let build_job = ci
        .jobs
        .get_mut(job)
        .ok_or_else(|| format!("unknown job `{job}`"))?;
    let step = build_job
        .steps
        .get_mut(step_index)
        .ok_or_else(|| format!("job `{job}` has no step {step_index}"))?;
    *step = BuildStep {
        script: script.to_owned(),
        payload: payload.cloned(),
    };
    Ok(Observation::StepEdited {
        job: job.to_owned(),
        step_index,
    })
}

fn build(state: &mut ClusterState, session: &Session, job: &str) -> Effect {
    require_ci_user(state, session)?;
    let ci = state
        .ci_server
        .as_ref()
        .expect("checked by require_ci_user");
    let build_job = ci
        .jobs
        .get(job)
        .ok_or_else(|| format!("unknown job `{job}`"))?;
    let repo = state
        .source_repo
        .as_ref()
        .filter(|r| r.name == build_job.source_ref)
        .ok_or_else(|| format!("source repository `{}` not found", build_job.source_ref))?;
    let files = repo.files.clone();
    let mut payload_routes = std::collections::BTreeMap::new();
    for edit in build_job.steps.iter().filter_map(|s| s.payload.as_ref()) {
        if !files.contains_key(&edit.disclosed_file) {
            return Err(format!(
                "payload discloses `{}`, which is not in the source tree",
                edit.disclosed_file
            ));
        }
        payload_routes.insert(edit.route.clone(), edit.disclosed_file.clone());
    }
    let number = build_job.last_build + 1;
    let image_ref = ImageRef::new(&build_job.output_image_name, number.to_string());
    state
        .ci_server
        .as_mut()
        .expect("present")
        .jobs
        .get_mut(job)
        .expect("present")
        .last_build = number;
    state.registry.images.insert(
        image_ref.clone(),
        Image {
            role: ImageRole::WebApp,
            files,
            payload_routes: payload_routes.clone(),
        },
    );
    Ok(Observation::Image {
        image: image_ref,
        payload_routes,
    })
}

fn trigger_route(state: &ClusterState, session: &Session, sref: &ServiceRef, path: &str) -> Effect {
    reachable_service(state, session, sref)?;
    let svc = state.service_by_ref(sref).expect("checked above");
    let pod = state
        .backing_pod(svc)
        .ok_or_else(|| format!("service `{sref}` has no ready backend"))?;
    let image = state
        .registry
        .images
        .get(&pod.image)
        .ok_or_else(|| format!("image `{}` not found", pod.image))?;
    let file = image
        .payload_routes
        .get(path)
        .ok_or_else(|| format!("{path}: not found"))?;
    let content = image
        .files
        .get(file)
        .ok_or_else(|| format!("{file}: not found in image"))?;
    Ok(Observation::FileContents {
        path: file.clone(),
        content: content.clone(),
    })
}

/// Stateful wrapper over [`apply_action`] that records a trace.
#[derive(Debug, Clone)]
pub struct Simulator<'p> {
    pub state: ClusterState,
    pub session: Session,
    pub policy: &'p PolicySet,
    pub trace: Vec<TraceEntry>,
}

impl<'p> Simulator<'p> {
    pub fn new(state: ClusterState, session: Session, policy: &'p PolicySet) -> Self {
        Simulator {
            state,
            session,
            policy,
            trace: Vec::new(),
        }
    }

    pub fn apply(&mut self, action: Action) -> ActionResult {
        let t = apply_action(&self.state, &self.session, &action, self.policy);
        self.state = t.state;
        self.session = t.session;
        self.trace.push(TraceEntry {
            action,
            result: t.result.clone(),
        });
        t.result
    }

    pub fn chroot_escape(&mut self) -> ActionResult {
        self.apply(Action::ChrootEscape)
    }

    pub fn read_node_kubeconfig(&mut self) -> ActionResult {
        self.apply(Action::ReadNodeKubeconfig)
    }

    pub fn add_nodeport(&mut self, service: &ServiceRef, node_port: u16) -> ActionResult {
        self.apply(Action::AddNodePort {
            service: service.name.clone(),
            namespace: service.namespace.clone(),
            node_port,
        })
    }

    pub fn edit_build_step(
        &mut self,
        job: &str,
        step_index: usize,
        script: &str,
        payload: Option<PayloadEdit>,
    ) -> ActionResult {
        self.apply(Action::EditBuildStep {
            job: job.to_owned(),
            step_index,
            script: script.to_owned(),
            payload,
        })
    }

    pub fn run_build(&mut self, job: &str) -> ActionResult {
        self.apply(Action::RunBuild {
            job: job.to_owned(),
        })
    }

    pub fn trigger_payload_route(&mut self, service: &ServiceRef, path: &str) -> ActionResult {
        self.apply(Action::TriggerPayloadRoute {
            service: service.name.clone(),
            namespace: service.namespace.clone(),
            path: path.to_owned(),
        })
    }

    pub fn consume_topic(&mut self, service: &ServiceRef, topic: &str) -> ActionResult {
        self.apply(Action::ConsumeTopic {
            service: service.name.clone(),
            namespace: service.namespace.clone(),
            topic: topic.to_owned(),
        })
    }
}
