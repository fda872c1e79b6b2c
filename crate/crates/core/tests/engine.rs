mod common;

use proptest::prelude::*;

use sscs_sim::action::{Action, Manifest, Observation, PodManifest, Session, Status};
use sscs_sim::builtin::{self, canonical_fixture, session_for};
use sscs_sim::engine::{apply_action, Simulator};
use sscs_sim::model::{CredentialLevel, ImageRef, PayloadEdit, ServiceRef, Volume};
use sscs_sim::network::{reachable, Location};
use sscs_sim::policy::PolicySet;

fn broker() -> ServiceRef {
    builtin::broker_service()
}

fn app() -> ServiceRef {
    ServiceRef::new("apps", "pc-app")
}

#[test]
fn relay_pod_apply_with_deploy_rights() {
    let f = canonical_fixture();
    let policy = PolicySet::empty();
    let mut sim = Simulator::new(
        f,
        session_for(&canonical_fixture(), builtin::DEPLOYER_SA),
        &policy,
    );
    let r = sim.apply(Action::KubectlApply {
        manifest: Manifest::Pod(builtin::relay_pod("kafka")),
    });
    assert!(r.is_applied(), "{r:?}");
    assert!(sim.state.pod("kafka", "custom-app").unwrap().ready);
}

#[test]
fn foreign_namespace_apply_is_blocked_and_state_unchanged() {
    let f = canonical_fixture();
    let s = session_for(&f, builtin::DEPLOYER_SA);
    let apply = Action::KubectlApply {
        manifest: Manifest::Pod(builtin::relay_pod("kafka")),
    };
    let t = apply_action(
        &f,
        &s,
        &apply,
        &PolicySet::single(builtin::namespace_scoped_rule()),
    );
    assert_eq!(
        t.result.status,
        Status::BlockedPolicy {
            rule_id: "namespace-scoped-service-accounts".into()
        }
    );
    assert_eq!(t.state, f);
    assert_eq!(t.session, s);
}

#[test]
fn out_of_scope_delete_is_denied() {
    let f = canonical_fixture();
    let s = session_for(&f, builtin::CRUD_SA);
    let t = apply_action(
        &f,
        &s,
        &Action::DeletePod {
            pod: "strimzi-kafka-0".into(),
            namespace: "kafka".into(),
        },
        &PolicySet::empty(),
    );
    assert!(
        matches!(t.result.status, Status::DeniedRbac { .. }),
        "{:?}",
        t.result
    );
    assert_eq!(t.state, f);
}

fn pod_shell(volume: Option<Volume>) -> (Simulator<'static>, Session) {
    static EMPTY: PolicySet = PolicySet { rules: Vec::new() };
    let f = canonical_fixture();
    let s = session_for(&f, builtin::CRUD_SA);
    let mut pod = PodManifest::new("p", "developer", builtin::tooling_image());
    if let Some(v) = volume {
        pod = pod.volume(v);
    }
    let mut sim = Simulator::new(f, s.clone(), &EMPTY);
    assert!(sim
        .apply(Action::KubectlApply {
            manifest: Manifest::Pod(pod)
        })
        .is_applied());
    assert!(sim
        .apply(Action::KubectlExec {
            pod: "p".into(),
            namespace: "developer".into()
        })
        .is_applied());
    (sim, s)
}

#[test]
fn root_host_path_escapes_to_the_pods_node() {
    let (mut sim, _) = pod_shell(Some(Volume::host_path("/", "/host")));
    let r = sim.chroot_escape();
    match r.observation {
        Some(Observation::NodeShell { node, level, .. }) => {
            assert_eq!(node, "worker-1");
            assert_eq!(level, CredentialLevel::NodeRoot);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(sim.session.location, Location::on_node("worker-1"));
}

#[test]
fn no_escape_without_a_root_mount() {
    for volume in [
        Some(Volume::ephemeral("/scratch")),
        Some(Volume::host_path("/var/data", "/data")),
        None,
    ] {
        let (mut sim, _) = pod_shell(volume.clone());
        let before = sim.state.clone();
        let r = sim.chroot_escape();
        assert!(
            matches!(r.status, Status::FailedPrecondition { .. }),
            "{volume:?}: {r:?}"
        );
        assert_eq!(sim.state, before);
    }
}

#[test]
fn node_kubeconfig_grants_admin_and_foreign_delete() {
    let (mut sim, _) = pod_shell(Some(Volume::host_path("/", "/host")));
    sim.chroot_escape();
    let r = sim.read_node_kubeconfig();
    let Some(Observation::Kubeconfig { path, credential }) = r.observation else {
        panic!("{r:?}");
    };
    assert_eq!(path, "/etc/kubernetes/ssl/kubecfg-kube-node.yaml");
    assert_eq!(credential.level, CredentialLevel::ClusterAdmin);
    assert!(sim
        .apply(Action::Authenticate {
            subject: credential.subject
        })
        .is_applied());
    let r = sim.apply(Action::DeletePod {
        pod: "coredns".into(),
        namespace: "kube-system".into(),
    });
    assert!(r.is_applied(), "{r:?}");
}

#[test]
fn kubeconfig_needs_a_node_shell() {
    let (mut sim, _) = pod_shell(Some(Volume::host_path("/", "/host")));
    let r = sim.read_node_kubeconfig();
    assert!(matches!(r.status, Status::FailedPrecondition { .. }));
}

#[test]
fn node_port_exposure_and_range() {
    let f = canonical_fixture();
    let policy = PolicySet::empty();
    let mut sim = Simulator::new(f.clone(), session_for(&f, builtin::NETOPS_SA), &policy);
    assert!(!reachable(
        &Location::External,
        f.service_by_ref(&broker()).unwrap()
    ));
    let r = sim.add_nodeport(&broker(), 29999);
    assert!(matches!(r.status, Status::FailedPrecondition { .. }));
    assert!(sim.add_nodeport(&broker(), 30500).is_applied());
    assert!(reachable(
        &Location::External,
        sim.state.service_by_ref(&broker()).unwrap()
    ));

    let blocked = PolicySet::single(builtin::ingress_restriction_rule());
    let t = apply_action(
        &f,
        &session_for(&f, builtin::NETOPS_SA),
        &Action::AddNodePort {
            service: broker().name,
            namespace: broker().namespace,
            node_port: 30500,
        },
        &blocked,
    );
    assert!(matches!(t.result.status, Status::BlockedPolicy { .. }));
    assert_eq!(t.state, f);
}

fn ci_session(user: &str) -> (sscs_sim::model::ClusterState, Session) {
    let f = canonical_fixture();
    let s = session_for(&f, user);
    (f, s)
}

fn hack() -> PayloadEdit {
    PayloadEdit {
        route: "/hack".into(),
        disclosed_file: "requirements.txt".into(),
    }
}

#[test]
fn build_step_edits() {
    let (f, s) = ci_session(builtin::CI_USER);
    let policy = PolicySet::empty();
    let mut sim = Simulator::new(f.clone(), s.clone(), &policy);
    sim.apply(Action::JenkinsLogin {
        user: builtin::CI_USER.into(),
    });
    assert!(sim
        .edit_build_step(builtin::BUILD_JOB, 1, "patch", Some(hack()))
        .is_applied());
    let r = sim.edit_build_step(builtin::BUILD_JOB, 9, "patch", None);
    assert!(matches!(r.status, Status::FailedPrecondition { .. }));

    let jenkins = PolicySet::single(builtin::jenkins_restriction_rule());
    let mut sim = Simulator::new(f, s, &jenkins);
    sim.apply(Action::JenkinsLogin {
        user: builtin::CI_USER.into(),
    });
    let r = sim.edit_build_step(builtin::BUILD_JOB, 1, "patch", Some(hack()));
    assert!(matches!(r.status, Status::BlockedPolicy { .. }));
}

#[test]
fn builds_number_monotonically_and_carry_payloads() {
    let (f, s) = ci_session(builtin::CI_USER);
    let policy = PolicySet::empty();
    let mut sim = Simulator::new(f, s, &policy);
    sim.apply(Action::JenkinsLogin {
        user: builtin::CI_USER.into(),
    });
    let Some(Observation::Image {
        image,
        payload_routes,
    }) = sim.run_build(builtin::BUILD_JOB).observation
    else {
        panic!()
    };
    assert_eq!(image, ImageRef::new("pc-app", "2"));
    assert!(payload_routes.is_empty());
    sim.edit_build_step(builtin::BUILD_JOB, 1, "patch", Some(hack()));
    let Some(Observation::Image {
        image,
        payload_routes,
    }) = sim.run_build(builtin::BUILD_JOB).observation
    else {
        panic!()
    };
    assert_eq!(image, ImageRef::new("pc-app", "3"));
    assert_eq!(payload_routes["/hack"], "requirements.txt");
}

#[test]
fn payload_route_serves_only_on_backdoored_deployments() {
    let f = canonical_fixture();
    let expected = f.source_repo.as_ref().unwrap().files["requirements.txt"].clone();
    let policy = PolicySet::empty();
    for backdoor in [true, false] {
        let mut sim = Simulator::new(f.clone(), session_for(&f, builtin::CI_USER), &policy);
        sim.apply(Action::JenkinsLogin {
            user: builtin::CI_USER.into(),
        });
        if backdoor {
            sim.edit_build_step(builtin::BUILD_JOB, 1, "patch", Some(hack()));
        }
        sim.run_build(builtin::BUILD_JOB);
        sim.apply(Action::Authenticate {
            subject: builtin::PIPELINE_SA.into(),
        });
        assert!(sim
            .apply(Action::DeployImage {
                pod: "pc-app".into(),
                namespace: "apps".into(),
                image: ImageRef::new("pc-app", "2"),
            })
            .is_applied());
        let r = sim.trigger_payload_route(&app(), "/hack");
        if backdoor {
            assert_eq!(
                r.observation,
                Some(Observation::FileContents {
                    path: "requirements.txt".into(),
                    content: expected.clone()
                })
            );
        } else {
            assert_eq!(
                r.status,
                Status::FailedPrecondition {
                    reason: "/hack: not found".into()
                }
            );
        }
    }
}

#[test]
fn payload_route_needs_reachability() {
    let mut f = canonical_fixture();
    f.services
        .iter_mut()
        .find(|s| s.name == "pc-app")
        .unwrap()
        .exposure = sscs_sim::model::Exposure::InternalOnly;
    let policy = PolicySet::empty();
    let mut sim = Simulator::new(f.clone(), session_for(&f, builtin::CI_USER), &policy);
    let r = sim.trigger_payload_route(&app(), "/hack");
    assert!(
        matches!(r.status, Status::FailedPrecondition { ref reason } if reason.contains("unreachable"))
    );
}

#[test]
fn consume_topic() {
    let f = canonical_fixture();
    let policy = PolicySet::empty();
    let mut outside = Simulator::new(f.clone(), session_for(&f, builtin::DEPLOYER_SA), &policy);
    assert!(matches!(
        outside.consume_topic(&broker(), "orders").status,
        Status::FailedPrecondition { .. }
    ));

    let mut inside = Session::new(
        f.issued_credential(builtin::DEPLOYER_SA).unwrap(),
        Location::in_cluster("kafka"),
    );
    inside.wallet.clear();
    inside.wallet.insert(inside.credential.clone());
    let mut sim = Simulator::new(f.clone(), inside, &policy);
    let seeded = f.brokers[0].topics["orders"].clone();
    assert_eq!(seeded.len(), 3);
    assert_eq!(
        sim.consume_topic(&broker(), "orders").observation,
        Some(Observation::Records {
            topic: "orders".into(),
            records: seeded
        })
    );
    let r = sim.consume_topic(&broker(), "telemetry");
    assert!(r.is_applied());
    assert_eq!(
        r.observation,
        Some(Observation::Records {
            topic: "telemetry".into(),
            records: vec![]
        })
    );
    // peeking does not consume
    assert_eq!(sim.state.brokers, f.brokers);
}

#[test]
fn policy_before_rbac_before_preconditions() {
    let f = canonical_fixture();
    let s = session_for(&f, builtin::DEPLOYER_SA);
    // foreign namespace, no RBAC in apps, and an image the registry lacks
    let pod = PodManifest::new("x", "apps", ImageRef::new("missing", "0"));
    let action = Action::KubectlApply {
        manifest: Manifest::Pod(pod),
    };
    let ns_rule = PolicySet::single(builtin::namespace_scoped_rule());
    assert!(matches!(
        apply_action(&f, &s, &action, &ns_rule).result.status,
        Status::BlockedPolicy { .. }
    ));
    assert!(matches!(
        apply_action(&f, &s, &action, &PolicySet::empty())
            .result
            .status,
        Status::DeniedRbac { .. }
    ));
    let allowed = Action::KubectlApply {
        manifest: Manifest::Pod(PodManifest::new(
            "x",
            "kafka",
            ImageRef::new("missing", "0"),
        )),
    };
    assert!(matches!(
        apply_action(&f, &s, &allowed, &PolicySet::empty())
            .result
            .status,
        Status::FailedPrecondition { .. }
    ));
}

#[test]
fn builtin_traces_are_bit_identical() {
    let f = canonical_fixture();
    for s in builtin::builtin_scenarios() {
        let a = sscs_sim::run_scenario(&f, &s, &PolicySet::empty()).unwrap();
        let b = sscs_sim::run_scenario(&f, &s, &PolicySet::empty()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}

proptest! {
    #[test]
    fn transitions_are_atomic_and_keep_invariants(seed in any::<u64>()) {
        common::walk(seed, 12, common::check_step).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn transitions_are_deterministic(seed in any::<u64>()) {
        common::walk(seed, 8, common::check_deterministic).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn rules_only_restrict(seed in any::<u64>()) {
        common::walk(seed, 8, common::check_monotone_restriction).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn rbac_is_monotone(seed in any::<u64>()) {
        common::check_rbac_monotone(seed).map_err(TestCaseError::fail)?;
    }
}
