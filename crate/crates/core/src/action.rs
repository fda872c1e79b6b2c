//! The attacker/operator action alphabet and what applying an action returns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{
    ClusterState, Credential, CredentialLevel, Exposure, ImageRef, PayloadEdit, ResourceKind,
    ServiceRef, Verb, Volume,
};
use crate::network::{Endpoint, Location};

/// Pod manifest submitted through `kubectl apply`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PodManifest {
    pub name: String,
    pub namespace: String,
    /// Scheduled onto the default node when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(default = "default_sa")]
    pub service_account: String,
    pub image: ImageRef,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub volumes: Vec<Volume>,
}

fn default_sa() -> String {
    "default".to_owned()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceManifest {
    pub name: String,
    pub namespace: String,
    pub selector: BTreeMap<String, String>,
    pub port: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_port: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Manifest {
    Pod(PodManifest),
    Service(ServiceManifest),
}

impl Manifest {
    pub fn namespace(&self) -> &str {
        match self {
            Manifest::Pod(p) => &p.namespace,
            Manifest::Service(s) => &s.namespace,
        }
    }

    pub fn resource_kind(&self) -> ResourceKind {
        match self {
            Manifest::Pod(_) => ResourceKind::Pod,
            Manifest::Service(_) => ResourceKind::Service,
        }
    }

    pub fn has_host_path(&self) -> bool {
        matches!(self, Manifest::Pod(p) if p.volumes.iter().any(Volume::is_host_path))
    }
}

/// One typed step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all_fields = "camelCase")]
pub enum Action {
    /// Switch the session to a credential the attacker holds.
    Authenticate {
        subject: String,
    },
    KubectlApply {
        manifest: Manifest,
    },
    /// `kubectl get <kind> [-n ns | -A]`.
    KubectlGet {
        kind: ResourceKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        namespace: Option<String>,
    },
    KubectlExec {
        pod: String,
        namespace: String,
    },
    ChrootEscape,
    ReadNodeKubeconfig,
    AddNodePort {
        service: String,
        namespace: String,
        node_port: u16,
    },
    Connect {
        service: String,
        namespace: String,
    },
    ConsumeTopic {
        service: String,
        namespace: String,
        topic: String,
    },
    ProduceTopic {
        service: String,
        namespace: String,
        topic: String,
        record: String,
    },
    JenkinsLogin {
        user: String,
    },
    EditBuildStep {
        job: String,
        step_index: usize,
        script: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        payload: Option<PayloadEdit>,
    },
    RunBuild {
        job: String,
    },
    PullImage {
        image: ImageRef,
    },
    DeployImage {
        pod: String,
        namespace: String,
        image: ImageRef,
    },
    TriggerPayloadRoute {
        service: String,
        namespace: String,
        path: String,
    },
    DeletePod {
        pod: String,
        namespace: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Authenticate,
    KubectlApply,
    KubectlGet,
    KubectlExec,
    ChrootEscape,
    ReadNodeKubeconfig,
    AddNodePort,
    Connect,
    ConsumeTopic,
    ProduceTopic,
    JenkinsLogin,
    EditBuildStep,
    RunBuild,
    PullImage,
    DeployImage,
    TriggerPayloadRoute,
    DeletePod,
}

impl ActionKind {
    pub const ALL: [ActionKind; 17] = [
        ActionKind::Authenticate,
        ActionKind::KubectlApply,
        ActionKind::KubectlGet,
        ActionKind::KubectlExec,
        ActionKind::ChrootEscape,
        ActionKind::ReadNodeKubeconfig,
        ActionKind::AddNodePort,
        ActionKind::Connect,
        ActionKind::ConsumeTopic,
        ActionKind::ProduceTopic,
        ActionKind::JenkinsLogin,
        ActionKind::EditBuildStep,
        ActionKind::RunBuild,
        ActionKind::PullImage,
        ActionKind::DeployImage,
        ActionKind::TriggerPayloadRoute,
        ActionKind::DeletePod,
    ];
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// An RBAC check an action needs; `namespace: None` means every namespace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RbacCheck {
    pub verb: Verb,
    pub kind: ResourceKind,
    pub namespace: Option<String>,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Authenticate { .. } => ActionKind::Authenticate,
            Action::KubectlApply { .. } => ActionKind::KubectlApply,
            Action::KubectlGet { .. } => ActionKind::KubectlGet,
            Action::KubectlExec { .. } => ActionKind::KubectlExec,
            Action::ChrootEscape => ActionKind::ChrootEscape,
            Action::ReadNodeKubeconfig => ActionKind::ReadNodeKubeconfig,
            Action::AddNodePort { .. } => ActionKind::AddNodePort,
            Action::Connect { .. } => ActionKind::Connect,
            Action::ConsumeTopic { .. } => ActionKind::ConsumeTopic,
            Action::ProduceTopic { .. } => ActionKind::ProduceTopic,
            Action::JenkinsLogin { .. } => ActionKind::JenkinsLogin,
            Action::EditBuildStep { .. } => ActionKind::EditBuildStep,
            Action::RunBuild { .. } => ActionKind::RunBuild,
            Action::PullImage { .. } => ActionKind::PullImage,
            Action::DeployImage { .. } => ActionKind::DeployImage,
            Action::TriggerPayloadRoute { .. } => ActionKind::TriggerPayloadRoute,
            Action::DeletePod { .. } => ActionKind::DeletePod,
        }
    }

    /// Writes this action makes through the cluster API, as
    /// `(verb, kind, target namespace)`.
    pub fn api_write(&self) -> Option<(Verb, ResourceKind, &str)> {
        match self {
            Action::KubectlApply { manifest } => {
                Some((Verb::Create, manifest.resource_kind(), manifest.namespace()))
            }
            Action::AddNodePort { namespace, .. } => {
                Some((Verb::Update, ResourceKind::Service, namespace))
            }
            Action::DeployImage { namespace, .. } => {
                Some((Verb::Update, ResourceKind::Pod, namespace))
            }
            Action::DeletePod { namespace, .. } => {
                Some((Verb::Delete, ResourceKind::Pod, namespace))
            }
            _ => None,
        }
    }

    pub fn rbac_checks(&self) -> Vec<RbacCheck> {
        let check = |verb, kind, ns: &str| RbacCheck {
            verb,
            kind,
            namespace: Some(ns.to_owned()),
        };
        match self {
            Action::KubectlGet { kind, namespace } => vec![RbacCheck {
                verb: Verb::List,
                kind: *kind,
                namespace: namespace.clone(),
            }],
            // exec is a create on the pods/exec subresource
            Action::KubectlExec { namespace, .. } => {
                vec![check(Verb::Create, ResourceKind::Pod, namespace)]
            }
            _ => match self.api_write() {
                Some((verb, kind, ns)) => vec![check(verb, kind, ns)],
                None => Vec::new(),
            },
        }
    }

    pub fn target_service(&self) -> Option<ServiceRef> {
        match self {
            Action::AddNodePort {
                service, namespace, ..
            }
            | Action::Connect { service, namespace }
            | Action::ConsumeTopic {
                service, namespace, ..
            }
            | Action::ProduceTopic {
                service, namespace, ..
            }
            | Action::TriggerPayloadRoute {
                service, namespace, ..
            } => Some(ServiceRef::new(namespace, service)),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Authenticate { subject } => write!(f, "authenticate as {subject}"),
            Action::KubectlApply {
                manifest: Manifest::Pod(p),
            } => write!(
                f,
                "kubectl apply pod {}/{} ({})",
                p.namespace, p.name, p.image
            ),
            Action::KubectlApply {
                manifest: Manifest::Service(s),
            } => write!(f, "kubectl apply service {}/{}", s.namespace, s.name),
            Action::KubectlGet { kind, namespace } => match namespace {
                Some(ns) => write!(f, "kubectl get {kind}s -n {ns}"),
                None => write!(f, "kubectl get {kind}s -A"),
            },
            Action::KubectlExec { pod, namespace } => {
                write!(f, "kubectl -n {namespace} exec -it {pod} bash")
            }
            Action::ChrootEscape => f.write_str("chroot /host/ bash"),
            Action::ReadNodeKubeconfig => f.write_str("read node kubeconfig"),
            Action::AddNodePort {
                service,
                namespace,
                node_port,
            } => write!(f, "add nodePort {node_port} to {namespace}/{service}"),
            Action::Connect { service, namespace } => write!(f, "connect to {namespace}/{service}"),
            Action::ConsumeTopic {
                service,
                namespace,
                topic,
            } => write!(f, "consume topic {topic} via {namespace}/{service}"),
            Action::ProduceTopic {
                service,
                namespace,
                topic,
                ..
            } => write!(f, "produce to topic {topic} via {namespace}/{service}"),
            Action::JenkinsLogin { user } => write!(f, "jenkins login as {user}"),
            Action::EditBuildStep {
                job, step_index, ..
            } => write!(f, "edit build step {step_index} of {job}"),
            Action::RunBuild { job } => write!(f, "run build {job}"),
            Action::PullImage { image } => write!(f, "docker pull {image}"),
            Action::DeployImage {
                pod,
                namespace,
                image,
            } => write!(f, "deploy {image} to {namespace}/{pod}"),
            Action::TriggerPayloadRoute {
                service,
                namespace,
                path,
            } => write!(f, "GET {path} on {namespace}/{service}"),
            Action::DeletePod { pod, namespace } => {
                write!(f, "kubectl delete pod {pod} -n {namespace}")
            }
        }
    }
}

/// Which shell, if any, the session has open.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Shell {
    Pod { namespace: String, name: String },
    Node { node: String },
}

/// An authenticated principal: the active credential, every credential the
/// attacker has collected, where its traffic comes from, and an open shell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Session {
    pub credential: Credential,
    pub wallet: BTreeSet<Credential>,
    pub location: Location,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_shell: Option<Shell>,
}

impl Session {
    pub fn new(credential: Credential, location: Location) -> Self {
        Session {
            wallet: [credential.clone()].into(),
            credential,
            location,
            open_shell: None,
        }
    }

    pub fn holds(&self, subject: &str) -> Option<&Credential> {
        self.wallet.iter().find(|c| c.subject == subject)
    }

    pub fn holds_cluster_admin(&self) -> bool {
        self.wallet
            .iter()
            .any(|c| c.level == CredentialLevel::ClusterAdmin)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(
    tag = "status",
    rename_all = "camelCase",
    rename_all_fields = "camelCase"
)]
pub enum Status {
    Applied,
    #[serde(rename = "deniedRBAC")]
    DeniedRbac {
        principal: String,
        verb: Verb,
        kind: ResourceKind,
        namespace: String,
    },
    BlockedPolicy {
        rule_id: String,
    },
    FailedPrecondition {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(
    tag = "type",
    rename_all = "camelCase",
    rename_all_fields = "camelCase"
)]
pub enum Observation {
    Authenticated {
        credential: Credential,
    },
    Created {
        kind: ResourceKind,
        namespace: String,
        name: String,
    },
    Resources {
        names: Vec<String>,
    },
    PodShell {
        namespace: String,
        pod: String,
        node: String,
    },
    /// Root shell on a node: `ls` of the host and `docker ps`.
    NodeShell {
        node: String,
        level: CredentialLevel,
        host_files: Vec<String>,
        running_containers: Vec<String>,
    },
    Kubeconfig {
        path: String,
        credential: Credential,
    },
    Endpoint {
        endpoint: Endpoint,
        /// The service is fronted by a relay app; the caller now acts from its namespace.
        relayed: bool,
    },
    Records {
        topic: String,
        records: Vec<String>,
    },
    Produced {
        topic: String,
        offset: usize,
    },
    CiLogin {
        user: String,
        stored_credentials: Vec<Credential>,
    },
    StepEdited {
        job: String,
        step_index: usize,
    },
    Image {
        image: ImageRef,
        payload_routes: BTreeMap<String, String>,
    },
    Deployed {
        namespace: String,
        pod: String,
        image: ImageRef,
    },
    FileContents {
        path: String,
        content: String,
    },
    Deleted {
        namespace: String,
        pod: String,
    },
}

impl Observation {
    pub fn credentials(&self) -> Vec<&Credential> {
        match self {
            Observation::Kubeconfig { credential, .. } => vec![credential],
            Observation::CiLogin {
                stored_credentials, ..
            } => stored_credentials.iter().collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionResult {
    #[serde(flatten)]
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
}

impl ActionResult {
    pub fn applied(observation: Observation) -> Self {
        ActionResult {
            status: Status::Applied,
            observation: Some(observation),
        }
    }

    pub fn not_applied(status: Status) -> Self {
        debug_assert!(status != Status::Applied);
        ActionResult {
            status,
            observation: None,
        }
    }

    pub fn failed(reason: impl Into<String>) -> Self {
        Self::not_applied(Status::FailedPrecondition {
            reason: reason.into(),
        })
    }

    pub fn is_applied(&self) -> bool {
        self.status == Status::Applied
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceEntry {
    pub action: Action,
    pub result: ActionResult,
}

/// Helpers for building manifests in scenarios and tests.
impl PodManifest {
    pub fn new(name: &str, namespace: &str, image: ImageRef) -> Self {
        PodManifest {
            name: name.to_owned(),
            namespace: namespace.to_owned(),
            node: None,
            service_account: default_sa(),
            image,
            labels: BTreeMap::new(),
            volumes: Vec::new(),
        }
    }

    pub fn label(mut self, key: &str, value: &str) -> Self {
        self.labels.insert(key.to_owned(), value.to_owned());
        self
    }

    pub fn volume(mut self, volume: Volume) -> Self {
        self.volumes.push(volume);
        self
    }
}

impl ServiceManifest {
    pub fn exposure(&self) -> Exposure {
        match self.node_port {
            Some(node_port) => Exposure::NodePort { node_port },
            None => Exposure::InternalOnly,
        }
    }
}

/// Names of resources of `kind` visible in `namespace` (or everywhere).
pub(crate) fn list_resources(
    state: &ClusterState,
    kind: ResourceKind,
    namespace: Option<&str>,
) -> Vec<String> {
    let in_scope = |ns: &str| namespace.is_none_or(|n| n == ns);
    let mut names: Vec<String> = match kind {
        ResourceKind::Pod => state
            .pods
            .iter()
            .filter(|p| in_scope(&p.namespace))
            .map(|p| p.container_ref())
            .collect(),
        ResourceKind::Service => state
            .services
            .iter()
            .filter(|s| in_scope(&s.namespace))
            .map(|s| s.service_ref().to_string())
            .collect(),
        ResourceKind::Secret => state
            .service_accounts
            .iter()
            .filter(|sa| in_scope(&sa.namespace))
            .map(|sa| format!("{}/{}-token", sa.namespace, sa.name))
            .collect(),
        ResourceKind::Topic => state
            .brokers
            .iter()
            .filter(|b| in_scope(&b.service.namespace))
            .flat_map(|b| b.topics.keys().map(move |t| format!("{}/{t}", b.name)))
            .collect(),
    };
    names.sort();
    names
}
