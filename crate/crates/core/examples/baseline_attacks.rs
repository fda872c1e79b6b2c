//! Runs the four shipped attacks against the unmitigated cluster.

use sscs_sim::builtin::{builtin_scenarios, canonical_fixture};
use sscs_sim::{run_scenario, PolicySet};

fn main() {
    let fixture = canonical_fixture();
    for scenario in builtin_scenarios() {
        let verdict =
            run_scenario(&fixture, &scenario, &PolicySet::empty()).expect("prerequisite resolves");
        println!("{:<22} {}", scenario.id, verdict.outcome.label());
        for entry in &verdict.trace {
            println!(
                "    {:<60} {:?}",
                entry.action.to_string(),
                entry.result.status
            );
        }
    }
}
