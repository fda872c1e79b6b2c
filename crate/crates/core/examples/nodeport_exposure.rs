//! Shows the broker service flipping from internal-only to externally reachable.

use sscs_sim::builtin::{broker_service, canonical_fixture, session_for, NETOPS_SA};
use sscs_sim::network::{reachable, Location};
use sscs_sim::{PolicySet, Simulator};

fn main() {
    let fixture = canonical_fixture();
    let broker = broker_service();
    let policy = PolicySet::empty();
    let mut sim = Simulator::new(fixture.clone(), session_for(&fixture, NETOPS_SA), &policy);

    let external = |sim: &Simulator| {
        reachable(
            &Location::External,
            sim.state.service_by_ref(&broker).unwrap(),
        )
    };
    println!("before: externally reachable = {}", external(&sim));
    for port in [29999, 32768, 30500] {
        let r = sim.add_nodeport(&broker, port);
        println!("nodePort {port}: {:?}", r.status);
    }
    println!("after: externally reachable = {}", external(&sim));
}
