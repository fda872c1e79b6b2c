//! Capability closure from a namespace-scoped foothold, with and without a rule.

use sscs_sim::builtin::{canonical_fixture, host_path_rule};
use sscs_sim::{analyze, Capability, Foothold, PolicySet};

fn main() {
    let fixture = canonical_fixture();
    let start = Foothold::new(["CrudIn(developer)".parse::<Capability>().unwrap()]);

    for (label, policy) in [
        ("no policy", PolicySet::empty()),
        ("hostPath denied", PolicySet::single(host_path_rule())),
    ] {
        let graph = analyze(&fixture, &start, &policy);
        println!("{label}: {} capabilities", graph.nodes.len());
        for cap in &graph.nodes {
            println!("  {cap:<40} via {:?}", graph.witness[cap]);
        }
        println!(
            "  cluster admin reachable: {}",
            graph.reaches(&Capability::ClusterAdmin)
        );
    }
}
