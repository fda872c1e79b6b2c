//! Threat rows for the components present in the shipped cluster.

use sscs_sim::builtin::canonical_fixture;
use sscs_sim::report::{render_threats_text, threat_model};

fn main() {
    print!(
        "{}",
        render_threats_text(&threat_model(&canonical_fixture()))
    );
}
