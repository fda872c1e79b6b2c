//! Prints the scenario x mitigation outcome grid.

use sscs_sim::builtin::{
    all_mitigations, builtin_scenarios, canonical_fixture, mitigation_policies,
};
use sscs_sim::run_scenario;

fn main() {
    let fixture = canonical_fixture();
    let scenarios = builtin_scenarios();
    let mut policies = mitigation_policies();
    policies.push(("all-mitigations", all_mitigations()));

    print!("{:<36}", "");
    for s in &scenarios {
        print!("{:<22}", s.id);
    }
    println!();
    for (name, policy) in &policies {
        print!("{name:<36}");
        for s in &scenarios {
            let v = run_scenario(&fixture, s, policy).unwrap();
            let cell = match v.outcome.step_index() {
                Some(i) => format!("{} @{i}", v.outcome.label()),
                None => v.outcome.label().to_owned(),
            };
            print!("{cell:<22}");
        }
        println!();
    }
}
