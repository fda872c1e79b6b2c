//! The namespace breakout, step by step, ending with a foreign pod deletion.

use sscs_sim::action::{Action, Observation};
use sscs_sim::builtin::{self, canonical_fixture, session_for};
use sscs_sim::{PolicySet, Simulator};

fn main() {
    let fixture = canonical_fixture();
    let policy = PolicySet::empty();
    let mut sim = Simulator::new(
        fixture.clone(),
        session_for(&fixture, builtin::CRUD_SA),
        &policy,
    );

    sim.apply(builtin::host_path_pod_apply("developer"));
    sim.apply(Action::KubectlExec {
        pod: "attacker-pod".into(),
        namespace: "developer".into(),
    });
    if let Some(Observation::NodeShell {
        node,
        running_containers,
        ..
    }) = sim.chroot_escape().observation
    {
        println!("root on {node}, containers: {running_containers:?}");
    }
    if let Some(Observation::Kubeconfig { path, credential }) =
        sim.read_node_kubeconfig().observation
    {
        println!(
            "found {path} for {} ({:?})",
            credential.subject, credential.level
        );
        sim.apply(Action::Authenticate {
            subject: credential.subject,
        });
    }
    let r = sim.apply(Action::DeletePod {
        pod: "strimzi-kafka-0".into(),
        namespace: "kafka".into(),
    });
    println!("delete kafka/strimzi-kafka-0: {:?}", r.status);

    let blocked = PolicySet::single(builtin::host_path_rule());
    let mut sim = Simulator::new(
        fixture.clone(),
        session_for(&fixture, builtin::CRUD_SA),
        &blocked,
    );
    println!(
        "with hostPath rule: {:?}",
        sim.apply(builtin::host_path_pod_apply("developer")).status
    );
}
