//! Typed world state: cluster resources, the CI server, the image registry,
//! the source repository and the message broker.
//!
//! Everything here is plain data with structural equality. Resource identity
//! is the `(kind, namespace, name)` tuple; there are no UIDs or resource
//! versions, so two states that hold the same resources compare equal.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Ports a NodePort service may publish on every node.
pub const NODE_PORT_RANGE: RangeInclusive<u16> = 30000..=32767;

/// File name of the node-local admin kubeconfig.
pub const NODE_KUBECONFIG_FILE: &str = "kubecfg-kube-node.yaml";

/// Only a hostPath volume of the host root directory allows a chroot escape.
pub const HOST_ROOT: &str = "/";

/// Base address for cluster IPs handed out to newly created services.
const CLUSTER_IP_PREFIX: &str = "10.96.0.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Verb {
    Create,
    Get,
    List,
    Update,
    Delete,
}

impl Verb {
    pub const ALL: [Verb; 5] = [
        Verb::Create,
        Verb::Get,
        Verb::List,
        Verb::Update,
        Verb::Delete,
    ];
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verb::Create => "create",
            Verb::Get => "get",
            Verb::List => "list",
            Verb::Update => "update",
            Verb::Delete => "delete",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ResourceKind {
    Pod,
    Service,
    Secret,
    Topic,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 4] = [
        ResourceKind::Pod,
        ResourceKind::Service,
        ResourceKind::Secret,
        ResourceKind::Topic,
    ];
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResourceKind::Pod => "pod",
            ResourceKind::Service => "service",
            ResourceKind::Secret => "secret",
            ResourceKind::Topic => "topic",
        })
    }
}

/// Where a [`RoleRule`] applies. Serialized as the namespace name, or `*` for
/// cluster-wide.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Scope {
    Namespace(String),
    ClusterWide,
}

impl Scope {
    pub fn contains(&self, namespace: &str) -> bool {
        match self {
            Scope::Namespace(ns) => ns == namespace,
            Scope::ClusterWide => true,
        }
    }
}

impl From<Scope> for String {
    fn from(scope: Scope) -> String {
        match scope {
            Scope::Namespace(ns) => ns,
            Scope::ClusterWide => "*".to_owned(),
        }
    }
}

impl TryFrom<String> for Scope {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        match value.as_str() {
            "" => Err("scope must be a namespace name or `*`".to_owned()),
            "*" => Ok(Scope::ClusterWide),
            _ => Ok(Scope::Namespace(value)),
        }
    }
}

/// One RBAC grant: `principal` may perform any of `verbs` on any of
/// `resource_kinds` within `scope`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoleRule {
    pub principal: String,
    pub verbs: BTreeSet<Verb>,
    pub resource_kinds: BTreeSet<ResourceKind>,
    pub scope: Scope,
}

impl RoleRule {
    pub fn covers(&self, principal: &str, verb: Verb, kind: ResourceKind, namespace: &str) -> bool {
        self.principal == principal
            && self.verbs.contains(&verb)
            && self.resource_kinds.contains(&kind)
            && self.scope.contains(namespace)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CredentialLevel {
    User,
    ServiceAccount,
    JenkinsUser,
    ClusterAdmin,
    NodeRoot,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Credential {
    pub subject: String,
    pub level: CredentialLevel,
}

impl Credential {
    pub fn new(subject: impl Into<String>, level: CredentialLevel) -> Self {
        Credential {
            subject: subject.into(),
            level,
        }
    }

    /// Namespace a service-account credential is tied to.
    pub fn home_namespace(&self) -> Option<&str> {
        if self.level != CredentialLevel::ServiceAccount {
            return None;
        }
        service_account_home(&self.subject)
    }
}

const SA_PREFIX: &str = "system:serviceaccount:";

/// RBAC principal name of a service account.
pub fn service_account_principal(namespace: &str, name: &str) -> String {
    format!("{SA_PREFIX}{namespace}:{name}")
}

pub fn service_account_home(subject: &str) -> Option<&str> {
    subject
        .strip_prefix(SA_PREFIX)
        .and_then(|rest| rest.split_once(':'))
        .map(|(ns, _)| ns)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ServiceAccount {
    pub name: String,
    pub namespace: String,
}

impl ServiceAccount {
    pub fn principal(&self) -> String {
        service_account_principal(&self.namespace, &self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Node {
    pub name: String,
    #[serde(default)]
    pub host_files: BTreeMap<String, String>,
    /// `namespace/pod` of every pod scheduled here.
    #[serde(default)]
    pub running_containers: Vec<String>,
}

impl Node {
    pub fn kubeconfig_paths(&self) -> impl Iterator<Item = &str> {
        self.host_files
            .keys()
            .map(String::as_str)
            .filter(|p| p.ends_with(NODE_KUBECONFIG_FILE))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(
    tag = "type",
    rename_all = "camelCase",
    rename_all_fields = "camelCase"
)]
pub enum VolumeKind {
    HostPath { host_directory: String },
    Ephemeral,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Volume {
    #[serde(flatten)]
    pub kind: VolumeKind,
    pub mount_point: String,
}

impl Volume {
    pub fn host_path(host_directory: &str, mount_point: &str) -> Self {
        Volume {
            kind: VolumeKind::HostPath {
                host_directory: host_directory.to_owned(),
            },
            mount_point: mount_point.to_owned(),
        }
    }

    pub fn ephemeral(mount_point: &str) -> Self {
        Volume {
            kind: VolumeKind::Ephemeral,
            mount_point: mount_point.to_owned(),
        }
    }

    pub fn is_host_path(&self) -> bool {
        matches!(self.kind, VolumeKind::HostPath { .. })
    }

    pub fn mounts_host_root(&self) -> bool {
        matches!(&self.kind, VolumeKind::HostPath { host_directory } if host_directory == HOST_ROOT)
    }
}

/// `name:tag`. The tag is everything after the last colon, so registry hosts
/// with ports are not supported.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ImageRef {
    pub name: String,
    pub tag: String,
}

impl ImageRef {
    pub fn new(name: impl Into<String>, tag: impl Into<String>) -> Self {
        ImageRef {
            name: name.into(),
            tag: tag.into(),
        }
    }
}

impl fmt::Display for ImageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.tag)
    }
}

impl FromStr for ImageRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.rsplit_once(':') {
            Some((name, tag)) if !name.is_empty() && !tag.is_empty() && !tag.contains('/') => {
                Ok(ImageRef::new(name, tag))
            }
            _ => Err(format!("image reference `{s}` must have the form name:tag")),
        }
    }
}

impl From<ImageRef> for String {
    fn from(r: ImageRef) -> String {
        r.to_string()
    }
}

impl TryFrom<String> for ImageRef {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Pod {
    pub name: String,
    pub namespace: String,
    pub node: String,
    pub service_account: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub volumes: Vec<Volume>,
    pub image: ImageRef,
    #[serde(default = "yes")]
    pub ready: bool,
}

fn yes() -> bool {
    true
}

impl Pod {
    pub fn container_ref(&self) -> String {
        format!("{}/{}", self.namespace, self.name)
    }

    pub fn mounts_host_root(&self) -> bool {
        self.volumes.iter().any(Volume::mounts_host_root)
    }
}

/// `namespace/name` reference to a service.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ServiceRef {
    pub namespace: String,
    pub name: String,
}

impl ServiceRef {
    pub fn new(namespace: impl Into<String>, name: impl Into<String>) -> Self {
        ServiceRef {
            namespace: namespace.into(),
            name: name.into(),
        }
    }
}

impl fmt::Display for ServiceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.namespace, self.name)
    }
}

impl FromStr for ServiceRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('/') {
            Some((ns, name)) if !ns.is_empty() && !name.is_empty() && !name.contains('/') => {
                Ok(ServiceRef::new(ns, name))
            }
            _ => Err(format!(
                "service reference `{s}` must have the form namespace/name"
            )),
        }
    }
}

impl From<ServiceRef> for String {
    fn from(r: ServiceRef) -> String {
        r.to_string()
    }
}

impl TryFrom<String> for ServiceRef {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(
    tag = "type",
    rename_all = "camelCase",
    rename_all_fields = "camelCase"
)]
pub enum Exposure {
    InternalOnly,
    NodePort { node_port: u16 },
}

impl Exposure {
    pub fn node_port(&self) -> Option<u16> {
        match self {
            Exposure::InternalOnly => None,
            Exposure::NodePort { node_port } => Some(*node_port),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Service {
    pub name: String,
    pub namespace: String,
    pub selector: BTreeMap<String, String>,
    #[serde(rename = "clusterIP")]
    pub cluster_ip: String,
    pub port: u16,
    pub exposure: Exposure,
}

impl Service {
    pub fn service_ref(&self) -> ServiceRef {
        ServiceRef::new(&self.namespace, &self.name)
    }

    pub fn selects(&self, pod: &Pod) -> bool {
        pod.namespace == self.namespace
            && !self.selector.is_empty()
            && self
                .selector
                .iter()
                .all(|(k, v)| pod.labels.get(k) == Some(v))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ImageRole {
    /// Platform or tooling image with no HTTP surface.
    #[default]
    Base,
    /// Web application serving routes (the pipeline-built app).
    WebApp,
    /// Producer/consumer UI that connects to arbitrary in-cluster endpoints
    /// on behalf of whoever drives it.
    Relay,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Image {
    #[serde(default)]
    pub role: ImageRole,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub files: BTreeMap<String, String>,
    /// URL path → file path it discloses.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub payload_routes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Registry {
    #[serde(default)]
    pub images: BTreeMap<ImageRef, Image>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceRepo {
    pub name: String,
    #[serde(default)]
    pub files: BTreeMap<String, String>,
}

/// Structured record of a backdoor route a build step appends to the app.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PayloadEdit {
    pub route: String,
    pub disclosed_file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BuildStep {
    pub script: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<PayloadEdit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BuildJob {
    pub source_ref: String,
    pub steps: Vec<BuildStep>,
    pub output_image_name: String,
    /// Number of the most recent build; the next build is tagged `last_build + 1`.
    #[serde(default)]
    pub last_build: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CiUser {
    pub name: String,
    pub credential: Credential,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CiServer {
    pub users: Vec<CiUser>,
    pub jobs: BTreeMap<String, BuildJob>,
    /// Credentials the pipeline uses to deploy; visible to logged-in CI users.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stored_credentials: Vec<Credential>,
}

impl CiServer {
    pub fn user(&self, name: &str) -> Option<&CiUser> {
        self.users.iter().find(|u| u.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BrokerApp {
    pub name: String,
    pub service: ServiceRef,
    #[serde(default)]
    pub topics: BTreeMap<String, Vec<String>>,
}

/// The complete simulated world.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClusterState {
    pub nodes: Vec<Node>,
    pub namespaces: Vec<String>,
    /// Human cluster users (no namespace affinity).
    #[serde(default)]
    pub users: Vec<String>,
    pub service_accounts: Vec<ServiceAccount>,
    #[serde(default)]
    pub role_rules: Vec<RoleRule>,
    #[serde(default)]
    pub pods: Vec<Pod>,
    #[serde(default)]
    pub services: Vec<Service>,
    pub node_credentials: BTreeMap<String, Credential>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_server: Option<CiServer>,
    #[serde(default)]
    pub registry: Registry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_repo: Option<SourceRepo>,
    #[serde(default)]
    pub brokers: Vec<BrokerApp>,
    /// Number of applied actions since the fixture was loaded.
    #[serde(default)]
    pub clock: u64,
}

impl ClusterState {
    pub fn has_namespace(&self, namespace: &str) -> bool {
        self.namespaces.iter().any(|n| n == namespace)
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn pod(&self, namespace: &str, name: &str) -> Option<&Pod> {
        self.pods
            .iter()
            .find(|p| p.namespace == namespace && p.name == name)
    }

    pub fn service(&self, namespace: &str, name: &str) -> Option<&Service> {
        self.services
            .iter()
            .find(|s| s.namespace == namespace && s.name == name)
    }

    pub fn service_by_ref(&self, r: &ServiceRef) -> Option<&Service> {
        self.service(&r.namespace, &r.name)
    }

    pub fn service_account(&self, namespace: &str, name: &str) -> Option<&ServiceAccount> {
        self.service_accounts
            .iter()
            .find(|s| s.namespace == namespace && s.name == name)
    }

    /// Node the scheduler picks when a manifest does not name one: the first
    /// node by name.
    pub fn default_node(&self) -> Option<&Node> {
        self.nodes.iter().min_by(|a, b| a.name.cmp(&b.name))
    }

    /// Ready pod backing a service, first by name.
    pub fn backing_pod(&self, service: &Service) -> Option<&Pod> {
        self.pods
            .iter()
            .filter(|p| p.ready && service.selects(p))
            .min_by(|a, b| a.name.cmp(&b.name))
    }

    pub fn broker_behind(&self, service: &ServiceRef) -> Option<&BrokerApp> {
        self.brokers.iter().find(|b| &b.service == service)
    }

    pub fn broker_behind_mut(&mut self, service: &ServiceRef) -> Option<&mut BrokerApp> {
        self.brokers.iter_mut().find(|b| &b.service == service)
    }

    /// Every credential the fixture has issued, keyed by subject.
    pub fn issued_credentials(&self) -> BTreeMap<String, Credential> {
        let mut out = BTreeMap::new();
        for sa in &self.service_accounts {
            let subject = sa.principal();
            out.insert(
                subject.clone(),
                Credential::new(subject, CredentialLevel::ServiceAccount),
            );
        }
        for user in &self.users {
            out.insert(user.clone(), Credential::new(user, CredentialLevel::User));
        }
        if let Some(ci) = &self.ci_server {
            for u in &ci.users {
                out.insert(u.credential.subject.clone(), u.credential.clone());
            }
        }
        for cred in self.node_credentials.values() {
            out.insert(cred.subject.clone(), cred.clone());
        }
        out
    }

    pub fn issued_credential(&self, subject: &str) -> Option<Credential> {
        self.issued_credentials().remove(subject)
    }

    pub fn is_issued(&self, credential: &Credential) -> bool {
        self.issued_credential(&credential.subject).as_ref() == Some(credential)
    }

    pub fn node_port_in_use(&self, port: u16, except: Option<&ServiceRef>) -> bool {
        self.services
            .iter()
            .any(|s| s.exposure.node_port() == Some(port) && Some(&s.service_ref()) != except)
    }

    /// Lowest unused address in the service range.
    pub fn next_cluster_ip(&self) -> String {
        let used: BTreeSet<&str> = self
            .services
            .iter()
            .map(|s| s.cluster_ip.as_str())
            .collect();
        (1..=254u16)
            .map(|n| format!("{CLUSTER_IP_PREFIX}{n}"))
            .find(|ip| !used.contains(ip.as_str()))
            .unwrap_or_else(|| format!("{CLUSTER_IP_PREFIX}255"))
    }

    /// Checks every structural invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut v = Vec::new();

        let mut seen = BTreeSet::new();
        for ns in &self.namespaces {
            if !seen.insert(("namespace", "", ns.as_str())) {
                v.push(format!("duplicate namespace `{ns}`"));
            }
        }
        for n in &self.nodes {
            if !seen.insert(("node", "", n.name.as_str())) {
                v.push(format!("duplicate node `{}`", n.name));
            }
        }
        for sa in &self.service_accounts {
            if !seen.insert(("serviceaccount", sa.namespace.as_str(), sa.name.as_str())) {
                v.push(format!(
                    "duplicate service account `{}/{}`",
                    sa.namespace, sa.name
                ));
            }
            if !self.has_namespace(&sa.namespace) {
                v.push(format!(
                    "service account `{}` references missing namespace `{}`",
                    sa.name, sa.namespace
                ));
            }
        }
        for p in &self.pods {
            if !seen.insert(("pod", p.namespace.as_str(), p.name.as_str())) {
                v.push(format!("duplicate pod `{}`", p.container_ref()));
            }
        }
        for s in &self.services {
            if !seen.insert(("service", s.namespace.as_str(), s.name.as_str())) {
                v.push(format!("duplicate service `{}`", s.service_ref()));
            }
        }

        for rule in &self.role_rules {
            if rule.verbs.is_empty() || rule.resource_kinds.is_empty() {
                v.push(format!(
                    "role rule for `{}` must name at least one verb and one resource kind",
                    rule.principal
                ));
            }
        }

        for node in &self.nodes {
            let paths: Vec<_> = node.kubeconfig_paths().collect();
            if paths.len() != 1 {
                v.push(format!(
                    "node `{}` must hold exactly one {NODE_KUBECONFIG_FILE} (found {})",
                    node.name,
                    paths.len()
                ));
            }
            match self.node_credentials.get(&node.name) {
                Some(c) if c.level == CredentialLevel::ClusterAdmin => {}
                Some(_) => v.push(format!(
                    "node `{}` kubeconfig credential is not cluster-admin",
                    node.name
                )),
                None => v.push(format!("node `{}` has no kubeconfig credential", node.name)),
            }
            let mut expected: Vec<String> = self
                .pods
                .iter()
                .filter(|p| p.node == node.name)
                .map(Pod::container_ref)
                .collect();
            let mut actual = node.running_containers.clone();
            expected.sort();
            actual.sort();
            if expected != actual {
                v.push(format!(
                    "node `{}` running containers {:?} disagree with scheduled pods {:?}",
                    node.name, actual, expected
                ));
            }
        }
        for name in self.node_credentials.keys() {
            if self.node(name).is_none() {
                v.push(format!("kubeconfig credential for unknown node `{name}`"));
            }
        }

        for p in &self.pods {
            if !self.has_namespace(&p.namespace) {
                v.push(format!(
                    "pod `{}` references missing namespace",
                    p.container_ref()
                ));
            }
            if self.node(&p.node).is_none() {
                v.push(format!(
                    "pod `{}` references missing node `{}`",
                    p.container_ref(),
                    p.node
                ));
            }
            if self
                .service_account(&p.namespace, &p.service_account)
                .is_none()
            {
                v.push(format!(
                    "pod `{}` references missing service account `{}`",
                    p.container_ref(),
                    p.service_account
                ));
            }
            if !self.registry.images.contains_key(&p.image) {
                v.push(format!(
                    "pod `{}` runs image `{}` absent from the registry",
                    p.container_ref(),
                    p.image
                ));
            }
            for vol in &p.volumes {
                if let VolumeKind::HostPath { host_directory } = &vol.kind {
                    if !host_directory.starts_with('/') {
                        v.push(format!(
                            "pod `{}` hostPath `{host_directory}` is not absolute",
                            p.container_ref()
                        ));
                    }
                }
            }
        }

        let mut ips = BTreeSet::new();
        for s in &self.services {
            if !self.has_namespace(&s.namespace) {
                v.push(format!(
                    "service `{}` references missing namespace",
                    s.service_ref()
                ));
            }
            if !ips.insert(s.cluster_ip.as_str()) {
                v.push(format!("clusterIP {} is not unique", s.cluster_ip));
            }
            if let Some(port) = s.exposure.node_port() {
                if !NODE_PORT_RANGE.contains(&port) {
                    v.push(format!(
                        "service `{}` nodePort {port} outside {}-{}",
                        s.service_ref(),
                        NODE_PORT_RANGE.start(),
                        NODE_PORT_RANGE.end()
                    ));
                }
            }
        }
        let mut node_ports = BTreeSet::new();
        for port in self.services.iter().filter_map(|s| s.exposure.node_port()) {
            if !node_ports.insert(port) {
                v.push(format!("nodePort {port} allocated twice"));
            }
        }

        if let Some(ci) = &self.ci_server {
            let mut names = BTreeSet::new();
            for u in &ci.users {
                if !names.insert(u.name.as_str()) {
                    v.push(format!("duplicate CI user `{}`", u.name));
                }
                if u.credential.level != CredentialLevel::JenkinsUser {
                    v.push(format!(
                        "CI user `{}` must hold a jenkinsUser credential",
                        u.name
                    ));
                }
            }
            for (name, job) in &ci.jobs {
                if job.steps.is_empty() {
                    v.push(format!("build job `{name}` has no steps"));
                }
            }
        }

        let mut subjects: BTreeMap<&str, CredentialLevel> = BTreeMap::new();
        let all_creds = self
            .service_accounts
            .iter()
            .map(|sa| (sa.principal(), CredentialLevel::ServiceAccount))
            .chain(
                self.users
                    .iter()
                    .map(|u| (u.clone(), CredentialLevel::User)),
            )
            .chain(
                self.ci_server
                    .iter()
                    .flat_map(|ci| ci.users.iter())
                    .map(|u| (u.credential.subject.clone(), u.credential.level)),
            )
            .chain(
                self.node_credentials
                    .values()
                    .map(|c| (c.subject.clone(), c.level)),
            )
            .collect::<Vec<_>>();
        for (subject, level) in &all_creds {
            if let Some(prev) = subjects.insert(subject.as_str(), *level) {
                if prev != *level {
                    v.push(format!(
                        "subject `{subject}` issued with conflicting levels"
                    ));
                }
            }
        }
        if let Some(ci) = &self.ci_server {
            for c in &ci.stored_credentials {
                if subjects.get(c.subject.as_str()) != Some(&c.level) {
                    v.push(format!(
                        "CI stored credential `{}` is not issued by the cluster",
                        c.subject
                    ));
                }
            }
        }

        for (image_ref, image) in &self.registry.images {
            for (route, file) in &image.payload_routes {
                if !image.files.contains_key(file) {
                    v.push(format!(
                        "image `{image_ref}` route `{route}` discloses missing file `{file}`"
                    ));
                }
            }
        }

        for b in &self.brokers {
            // exposure is checked only at load time; attacks may change it
            if self.service_by_ref(&b.service).is_none() {
                v.push(format!(
                    "broker `{}` fronted by missing service `{}`",
                    b.name, b.service
                ));
            }
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invariant(v))
        }
    }

    /// Structural invariants plus the ones that only hold on a freshly
    /// loaded fixture.
    pub fn validate_fixture(&self) -> Result<(), ModelError> {
        let mut v = match self.validate() {
            Ok(()) => Vec::new(),
            Err(ModelError::Invariant(v)) => v,
            Err(e) => return Err(e),
        };
        for b in &self.brokers {
            if let Some(svc) = self.service_by_ref(&b.service) {
                if svc.exposure != Exposure::InternalOnly {
                    v.push(format!(
                        "broker `{}` service `{}` must start internal-only",
                        b.name, b.service
                    ));
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invariant(v))
        }
    }
}
