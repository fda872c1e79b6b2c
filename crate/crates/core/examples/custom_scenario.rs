//! Loads a scenario from YAML and runs it with a policy loaded the same way.

use sscs_sim::builtin::canonical_fixture;
use sscs_sim::{load_policy, load_scenario, run_scenario, PolicySet};

const SCENARIO: &str = r#"
id: relay-only
title: Deploy the relay next to the broker and stop there
prerequisite:
  principal: system:serviceaccount:developer:deployer
  location: { zone: external }
steps:
  - action: KubectlApply
    manifest:
      kind: Pod
      name: custom-app
      namespace: kafka
      image: py-producer-consumer:1.0
      labels: { app: custom-app }
goal:
  type: observationContains
  text: custom-app
"#;

const POLICY: &str = r#"
rules:
  - id: scoped
    kind: NamespaceScopedServiceAccounts
"#;

fn main() {
    let scenario = match load_scenario(SCENARIO) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    let scoped = load_policy(POLICY).unwrap();
    let fixture = canonical_fixture();
    for (label, policy) in [("no policy", PolicySet::empty()), ("scoped", scoped)] {
        let verdict = run_scenario(&fixture, &scenario, &policy).unwrap();
        println!("{label}: {:?}", verdict.outcome);
        println!("{}", serde_json::to_string(&verdict.trace).unwrap());
    }
}
