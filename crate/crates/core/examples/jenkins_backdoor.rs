//! Drives the CI backdoor by hand: edit a build step, build, deploy, hit the route.

use sscs_sim::action::{Action, Observation};
use sscs_sim::builtin::{self, canonical_fixture, session_for};
use sscs_sim::model::{ImageRef, PayloadEdit, ServiceRef};
use sscs_sim::{PolicySet, Simulator};

fn main() {
    let fixture = canonical_fixture();
    let policy = PolicySet::empty();
    let mut sim = Simulator::new(
        fixture.clone(),
        session_for(&fixture, builtin::CI_USER),
        &policy,
    );

    sim.apply(Action::JenkinsLogin {
        user: builtin::CI_USER.into(),
    });
    sim.edit_build_step(
        builtin::BUILD_JOB,
        1,
        "append a /hack route to f_pc.py",
        Some(PayloadEdit {
            route: "/hack".into(),
            disclosed_file: "requirements.txt".into(),
        }),
    );
    if let Some(Observation::Image {
        image,
        payload_routes,
    }) = sim.run_build(builtin::BUILD_JOB).observation
    {
        println!(
            "built {image} with routes {:?}",
            payload_routes.keys().collect::<Vec<_>>()
        );
    }
    sim.apply(Action::Authenticate {
        subject: builtin::PIPELINE_SA.into(),
    });
    sim.apply(Action::DeployImage {
        pod: "pc-app".into(),
        namespace: "apps".into(),
        image: ImageRef::new("pc-app", "2"),
    });
    let served = sim.trigger_payload_route(&ServiceRef::new("apps", "pc-app"), "/hack");
    match served.observation {
        Some(Observation::FileContents { path, content }) => {
            print!("GET /hack -> {path}:\n{content}")
        }
        _ => println!("GET /hack -> {:?}", served.status),
    }

    // same edit with the Jenkins rule in force
    let guarded = PolicySet::single(builtin::jenkins_restriction_rule());
    let mut sim = Simulator::new(
        fixture.clone(),
        session_for(&fixture, builtin::CI_USER),
        &guarded,
    );
    sim.apply(Action::JenkinsLogin {
        user: builtin::CI_USER.into(),
    });
    let r = sim.edit_build_step(builtin::BUILD_JOB, 1, "patch", None);
    println!("with restriction: {:?}", r.status);
}
