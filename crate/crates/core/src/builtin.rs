//! The shipped fixture, the four attack scenarios and the four mitigations.
//!
//! Each scenario step carries the command it stands for as a comment.

use std::sync::OnceLock;

use crate::action::{Action, Manifest, PodManifest, ServiceManifest, Session};
use crate::fixture::load_fixture;
use crate::model::{ClusterState, ImageRef, PayloadEdit, ResourceKind, ServiceRef, Volume};
use crate::network::Location;
use crate::policy::{HostPathMode, PolicyRule, PolicySet, RuleKind};
use crate::scenario::{Goal, Prerequisite, Scenario};

pub const CANONICAL_FIXTURE_YAML: &str = include_str!("../assets/fixtures/canonical.yaml");
pub const SMALL_FIXTURE_YAML: &str = include_str!("../assets/fixtures/small.yaml");

/// Shipped scenario documents, in built-in order.
pub const SCENARIO_FILES: [(&str, &str); 4] = [
    (
        "retrieve-topic-data.yaml",
        include_str!("../assets/scenarios/retrieve-topic-data.yaml"),
    ),
    (
        "ci-build-backdoor.yaml",
        include_str!("../assets/scenarios/ci-build-backdoor.yaml"),
    ),
    (
        "expose-cluster-ip.yaml",
        include_str!("../assets/scenarios/expose-cluster-ip.yaml"),
    ),
    (
        "hostpath-breakout.yaml",
        include_str!("../assets/scenarios/hostpath-breakout.yaml"),
    ),
];

/// Shipped policy documents: the four single-rule mitigations, then all of them.
pub const POLICY_FILES: [(&str, &str); 5] = [
    (
        "namespace-scoped-service-accounts.yaml",
        include_str!("../assets/policies/namespace-scoped-service-accounts.yaml"),
    ),
    (
        "jenkins-build-edit-restriction.yaml",
        include_str!("../assets/policies/jenkins-build-edit-restriction.yaml"),
    ),
    (
        "ingress-object-restriction.yaml",
        include_str!("../assets/policies/ingress-object-restriction.yaml"),
    ),
    (
        "hostpath-restriction.yaml",
        include_str!("../assets/policies/hostpath-restriction.yaml"),
    ),
    (
        "all-mitigations.yaml",
        include_str!("../assets/policies/all-mitigations.yaml"),
    ),
];

pub const BROKER_NAMESPACE: &str = "kafka";
pub const BROKER_SERVICE: &str = "strimzi-service";
pub const APP_NAMESPACE: &str = "apps";
pub const APP_SERVICE: &str = "pc-app";
pub const BUILD_JOB: &str = "pc-app-build";
pub const NODE_ADMIN: &str = "kube-node-admin";

pub const DEPLOYER_SA: &str = "system:serviceaccount:developer:deployer";
pub const CRUD_SA: &str = "system:serviceaccount:developer:crud-sa";
pub const NETOPS_SA: &str = "system:serviceaccount:kafka:netops";
pub const PIPELINE_SA: &str = "system:serviceaccount:apps:jenkins-deployer";
pub const CI_USER: &str = "dev-lead";
pub const CI_ADMIN: &str = "jenkins-admin";

/// Parsed once per process; callers get their own copy.
pub fn canonical_fixture() -> ClusterState {
    static PARSED: OnceLock<ClusterState> = OnceLock::new();
    PARSED
        .get_or_init(|| load_fixture(CANONICAL_FIXTURE_YAML).expect("canonical fixture is valid"))
        .clone()
}

pub fn small_fixture() -> ClusterState {
    static PARSED: OnceLock<ClusterState> = OnceLock::new();
    PARSED
        .get_or_init(|| load_fixture(SMALL_FIXTURE_YAML).expect("small fixture is valid"))
        .clone()
}

pub fn broker_service() -> ServiceRef {
    ServiceRef::new(BROKER_NAMESPACE, BROKER_SERVICE)
}

/// A fresh external session for an issued subject.
///
/// Panics if the fixture never issued `subject`.
pub fn session_for(state: &ClusterState, subject: &str) -> Session {
    let cred = state
        .issued_credential(subject)
        .unwrap_or_else(|| panic!("`{subject}` is not issued by the fixture"));
    Session::new(cred, Location::External)
}

pub fn relay_image() -> ImageRef {
    ImageRef::new("py-producer-consumer", "1.0")
}

pub fn tooling_image() -> ImageRef {
    ImageRef::new("alpine", "3.15")
}

/// Pod manifest for the attacker's breakout pod in `namespace`.
pub fn host_path_pod(namespace: &str) -> PodManifest {
    PodManifest::new("attacker-pod", namespace, tooling_image())
        .label("app", "attacker")
        .volume(Volume::host_path("/", "/host"))
}

pub fn host_path_pod_apply(namespace: &str) -> Action {
    Action::KubectlApply {
        manifest: Manifest::Pod(host_path_pod(namespace)),
    }
}

/// The producer/consumer UI the attacker deploys next to the broker.
pub fn relay_pod(namespace: &str) -> PodManifest {
    PodManifest::new("custom-app", namespace, relay_image()).label("app", "custom-app")
}

pub fn relay_service(namespace: &str, node_port: u16) -> ServiceManifest {
    ServiceManifest {
        name: "custom-app".into(),
        namespace: namespace.into(),
        selector: [("app".to_owned(), "custom-app".to_owned())].into(),
        port: 5000,
        node_port: Some(node_port),
    }
}

pub const BACKDOOR_ROUTE: &str = "/hack";
pub const DISCLOSED_FILE: &str = "requirements.txt";

const BACKDOOR_SCRIPT: &str = "cat >> f_pc.py <<'EOF'\n@app.route('/hack')\ndef hack():\n    return open('requirements.txt').read()\nEOF\n";

fn retrieve_topic_data() -> Scenario {
    let ns = BROKER_NAMESPACE;
    Scenario {
        id: "retrieve-topic-data".into(),
        title: "Deploy a custom app next to the broker and siphon topic data".into(),
        prerequisite: Prerequisite {
            principal: DEPLOYER_SA.into(),
            location: Location::External,
        },
        steps: vec![
            // kubectl apply -f name_of_custom_app.yaml
            Action::KubectlApply {
                manifest: Manifest::Pod(relay_pod(ns)),
            },
            // (same manifest) the app's externally exposed web hook
            Action::KubectlApply {
                manifest: Manifest::Service(relay_service(ns, 30080)),
            },
            // kubectl get pods -n <apps namespace>
            Action::KubectlGet {
                kind: ResourceKind::Pod,
                namespace: Some(ns.into()),
            },
            // kubectl get services -n <strimzi namespace>
            Action::KubectlGet {
                kind: ResourceKind::Service,
                namespace: Some(ns.into()),
            },
            // navigate to the custom app URL
            Action::Connect {
                service: "custom-app".into(),
                namespace: ns.into(),
            },
            // plug in clusterIP:port of Strimzi
            Action::Connect {
                service: BROKER_SERVICE.into(),
                namespace: ns.into(),
            },
            // data is shown by the custom app
            Action::ConsumeTopic {
                service: BROKER_SERVICE.into(),
                namespace: ns.into(),
                topic: "orders".into(),
            },
        ],
        goal: Goal::TopicDataRead {
            topic: "orders".into(),
        },
    }
}

fn ci_build_backdoor() -> Scenario {
    let next_tag = ImageRef::new("pc-app", "2");
    Scenario {
        id: "ci-build-backdoor".into(),
        title: "Edit a CI build step to ship a backdoor route".into(),
        prerequisite: Prerequisite {
            principal: CI_USER.into(),
            location: Location::External,
        },
        steps: vec![
            // Jenkins login: username/password
            Action::JenkinsLogin {
                user: CI_USER.into(),
            },
            // modify the build step that patches files pulled from GitHub
            Action::EditBuildStep {
                job: BUILD_JOB.into(),
                step_index: 1,
                script: BACKDOOR_SCRIPT.into(),
                payload: Some(PayloadEdit {
                    route: BACKDOOR_ROUTE.into(),
                    disclosed_file: DISCLOSED_FILE.into(),
                }),
            },
            // run Jenkins build
            Action::RunBuild {
                job: BUILD_JOB.into(),
            },
            // confirm kubeconfig matches the desired cluster
            Action::Authenticate {
                subject: PIPELINE_SA.into(),
            },
            // docker pull repo_name/image_name/tag
            Action::PullImage {
                image: next_tag.clone(),
            },
            // kubectl apply -f name_of_image.yaml
            Action::DeployImage {
                pod: APP_SERVICE.into(),
                namespace: APP_NAMESPACE.into(),
                image: next_tag,
            },
            // python_app_url/hack
            Action::TriggerPayloadRoute {
                service: APP_SERVICE.into(),
                namespace: APP_NAMESPACE.into(),
                path: BACKDOOR_ROUTE.into(),
            },
        ],
        goal: Goal::PayloadRouteServed {
            path: BACKDOOR_ROUTE.into(),
            disclosed_file: DISCLOSED_FILE.into(),
        },
    }
}

fn expose_cluster_ip() -> Scenario {
    Scenario {
        id: "expose-cluster-ip".into(),
        title: "Add a NodePort to the internal broker service".into(),
        prerequisite: Prerequisite {
            principal: NETOPS_SA.into(),
            location: Location::External,
        },
        steps: vec![
            // kubectl get services -n <strimzi namespace>
            Action::KubectlGet {
                kind: ResourceKind::Service,
                namespace: Some(BROKER_NAMESPACE.into()),
            },
            // type: NodePort, nodePort in 30000-32767
            Action::AddNodePort {
                service: BROKER_SERVICE.into(),
                namespace: BROKER_NAMESPACE.into(),
                node_port: 30500,
            },
            // contact the newly exposed IP
            Action::Connect {
                service: BROKER_SERVICE.into(),
                namespace: BROKER_NAMESPACE.into(),
            },
        ],
        goal: Goal::ExternallyReachable {
            service: broker_service(),
        },
    }
}

fn hostpath_breakout() -> Scenario {
    Scenario {
        id: "hostpath-breakout".into(),
        title: "Break out of a namespace through a hostPath volume".into(),
        prerequisite: Prerequisite {
            principal: CRUD_SA.into(),
            location: Location::External,
        },
        steps: vec![
            // kubectl apply -f attacker_pod_name.yaml
            host_path_pod_apply("developer"),
            // kubectl -n crud_namespace exec -it attack_pod_name bash
            Action::KubectlExec {
                pod: "attacker-pod".into(),
                namespace: "developer".into(),
            },
            // chroot /host/ bash
            Action::ChrootEscape,
            // locate kubecfg-kube-node.yaml
            Action::ReadNodeKubeconfig,
            // kubectl --kubeconfig=.../kubecfg-kube-node.yaml
            Action::Authenticate {
                subject: NODE_ADMIN.into(),
            },
            // ... get pods -A
            Action::KubectlGet {
                kind: ResourceKind::Pod,
                namespace: None,
            },
            // ... delete pod pod_name -n pod_namespace
            Action::DeletePod {
                pod: "strimzi-kafka-0".into(),
                namespace: BROKER_NAMESPACE.into(),
            },
        ],
        goal: Goal::AllOf {
            goals: vec![Goal::ClusterAdminObtained, Goal::CrossNamespacePodDeleted],
        },
    }
}

/// The four attacks, in order: topic siphoning, CI backdoor, NodePort
/// exposure, hostPath breakout.
pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![
        retrieve_topic_data(),
        ci_build_backdoor(),
        expose_cluster_ip(),
        hostpath_breakout(),
    ]
}

pub fn builtin_scenario(id: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.id == id)
}

pub fn namespace_scoped_rule() -> PolicyRule {
    PolicyRule {
        id: "namespace-scoped-service-accounts".into(),
        kind: RuleKind::NamespaceScopedServiceAccounts,
    }
}

pub fn jenkins_restriction_rule() -> PolicyRule {
    PolicyRule {
        id: "jenkins-build-edit-restriction".into(),
        kind: RuleKind::JenkinsBuildEditRestriction {
            allowed_principals: vec![CI_ADMIN.into()],
        },
    }
}

pub fn ingress_restriction_rule() -> PolicyRule {
    PolicyRule {
        id: "ingress-object-restriction".into(),
        kind: RuleKind::IngressObjectRestriction {
            protected_services: vec![broker_service()],
            allowed_principals: vec!["system:serviceaccount:kafka:strimzi-cluster-operator".into()],
        },
    }
}

pub fn host_path_rule() -> PolicyRule {
    PolicyRule {
        id: "hostpath-restriction".into(),
        kind: RuleKind::HostPathRestriction {
            mode: HostPathMode::DenyAll,
        },
    }
}

/// Single-rule mitigation sets, paired with the built-in scenario each one
/// targets (same order as [`builtin_scenarios`]).
pub fn mitigation_policies() -> Vec<(&'static str, PolicySet)> {
    vec![
        (
            "namespace-scoped-service-accounts",
            PolicySet::single(namespace_scoped_rule()),
        ),
        (
            "jenkins-build-edit-restriction",
            PolicySet::single(jenkins_restriction_rule()),
        ),
        (
            "ingress-object-restriction",
            PolicySet::single(ingress_restriction_rule()),
        ),
        ("hostpath-restriction", PolicySet::single(host_path_rule())),
    ]
}

pub fn all_mitigations() -> PolicySet {
    PolicySet {
        rules: vec![
            namespace_scoped_rule(),
            jenkins_restriction_rule(),
            ingress_restriction_rule(),
            host_path_rule(),
        ],
    }
}
