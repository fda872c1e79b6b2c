mod common;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use sscs_sim::analyzer::{
    agrees_with_simulator, analyze, analyze_scenario, Capability, EscalationGraph, Foothold,
    TransitionRule,
};
use sscs_sim::builtin::{self, builtin_scenarios, canonical_fixture, mitigation_policies};
use sscs_sim::model::{ClusterState, Credential, CredentialLevel};
use sscs_sim::policy::PolicySet;

fn caps(list: &[&str]) -> BTreeSet<Capability> {
    list.iter().map(|s| s.parse().unwrap()).collect()
}

fn random_actor(rng: &mut impl Rng, f: &ClusterState) -> Option<Credential> {
    let issued: Vec<Credential> = f.issued_credentials().into_values().collect();
    if rng.gen_bool(0.3) {
        None
    } else {
        issued.choose(rng).cloned()
    }
}

#[test]
fn crud_in_developer_reaches_cluster_admin_through_the_node() {
    let g = analyze(
        &canonical_fixture(),
        &Foothold::new(caps(&["CrudIn(developer)", "InClusterNetwork"])),
        &PolicySet::empty(),
    );
    let path = &g.witness[&Capability::ClusterAdmin];
    assert_eq!(path.len(), 3);
    let yields: Vec<String> = path
        .iter()
        .map(|id| {
            g.edges
                .iter()
                .find(|e| &e.id == id)
                .unwrap()
                .yields
                .to_string()
        })
        .collect();
    assert_eq!(
        yields,
        [
            "ShellInPod(developer)",
            "NodeRoot(worker-1)",
            "ClusterAdmin"
        ]
    );
}

#[test]
fn host_path_deny_all_removes_cluster_admin() {
    let policy = PolicySet::single(builtin::host_path_rule());
    let g = analyze(
        &canonical_fixture(),
        &Foothold::new(caps(&["CrudIn(developer)", "InClusterNetwork"])),
        &policy,
    );
    assert!(!g.reaches(&Capability::ClusterAdmin));
}

#[test]
fn empty_start_empty_closure() {
    for policy in [PolicySet::empty(), builtin::all_mitigations()] {
        let g = analyze(&canonical_fixture(), &Foothold::default(), &policy);
        assert!(g.nodes.is_empty());
    }
}

#[test]
fn builtins_agree_under_every_shipped_policy() {
    let f = canonical_fixture();
    let mut policies = vec![PolicySet::empty()];
    policies.extend(mitigation_policies().into_iter().map(|(_, p)| p));
    policies.push(builtin::all_mitigations());
    for s in builtin_scenarios() {
        for p in &policies {
            let a = analyze_scenario(&f, &s, p).unwrap();
            assert!(a.agrees, "{} under {:?}: {a:#?}", s.id, p.rules);
        }
    }
}

#[test]
fn matched_mitigation_makes_goal_unreachable() {
    let f = canonical_fixture();
    for (s, (name, p)) in builtin_scenarios().iter().zip(mitigation_policies()) {
        let a = analyze_scenario(&f, s, &p).unwrap();
        assert!(
            !a.goal_reachable && !a.simulator_achieved,
            "{} / {name}",
            s.id
        );
    }
}

#[test]
fn random_fixtures_agree() {
    let mut rng = common::rng(0x5eed_0001);
    let scenarios = builtin_scenarios();
    let mut achieved = 0;
    for i in 0..200 {
        let f = common::random_fixture(&mut rng);
        let p = common::random_policy(&mut rng);
        for s in &scenarios {
            let a = analyze_scenario(&f, s, &p).unwrap();
            assert!(
                a.agrees,
                "fixture #{i}, {}: analyzer {} simulator {}\npolicy {:?}",
                s.id, a.goal_reachable, a.simulator_achieved, p.rules
            );
            achieved += usize::from(a.simulator_achieved);
        }
    }
    // both verdicts must actually occur for the comparison to mean anything
    assert!(achieved > 100 && achieved < 700, "achieved {achieved}/800");
}

#[test]
fn closure_is_monotone_in_the_start_set() {
    let mut rng = common::rng(0x5eed_0002);
    for _ in 0..200 {
        let f = common::random_fixture(&mut rng);
        let p = common::random_policy(&mut rng);
        let actor = random_actor(&mut rng, &f);
        let small = common::random_capabilities(&mut rng, &f);
        let mut large = small.clone();
        large.extend(common::random_capabilities(&mut rng, &f));
        let start = |c: &BTreeSet<Capability>| Foothold {
            actor: actor.clone(),
            capabilities: c.clone(),
        };
        let a = analyze(&f, &start(&small), &p);
        let b = analyze(&f, &start(&large), &p);
        assert!(a.nodes.is_subset(&b.nodes));
    }
}

#[test]
fn adding_a_rule_never_adds_capabilities() {
    let mut rng = common::rng(0x5eed_0003);
    let extra: Vec<_> = builtin::all_mitigations().rules;
    for _ in 0..200 {
        let f = common::random_fixture(&mut rng);
        let p = common::random_policy(&mut rng);
        let start = Foothold {
            actor: random_actor(&mut rng, &f),
            capabilities: common::random_capabilities(&mut rng, &f),
        };
        let stricter = p.with_rule(extra.choose(&mut rng).unwrap().clone());
        let loose = analyze(&f, &start, &p);
        let tight = analyze(&f, &start, &stricter);
        assert!(tight.nodes.is_subset(&loose.nodes));
    }
}

fn derives(initial: &BTreeSet<Capability>, rules: &[&TransitionRule], target: &Capability) -> bool {
    let mut reached = initial.clone();
    loop {
        let before = reached.len();
        for r in rules {
            if r.requires.is_subset(&reached) {
                reached.insert(r.yields.clone());
            }
        }
        if reached.contains(target) {
            return true;
        }
        if reached.len() == before {
            return false;
        }
    }
}

/// Whether any subset of `edges` with exactly `k` rules derives `target`.
fn some_subset_derives(g: &EscalationGraph, target: &Capability, k: usize) -> bool {
    fn go<'a>(
        g: &'a EscalationGraph,
        target: &Capability,
        start: usize,
        k: usize,
        chosen: &mut Vec<&'a TransitionRule>,
    ) -> bool {
        if chosen.len() == k {
            return derives(&g.initial, chosen, target);
        }
        for i in start..g.edges.len() {
            chosen.push(&g.edges[i]);
            if go(g, target, i + 1, k, chosen) {
                return true;
            }
            chosen.pop();
        }
        false
    }
    go(g, target, 0, k, &mut Vec::new())
}

#[test]
fn witnesses_are_valid_and_minimal() {
    let mut rng = common::rng(0x5eed_0004);
    let mut checked = 0;
    for _ in 0..60 {
        let f = common::random_fixture(&mut rng);
        let p = common::random_policy(&mut rng);
        let start = Foothold {
            actor: random_actor(&mut rng, &f),
            capabilities: common::random_capabilities(&mut rng, &f),
        };
        let g = analyze(&f, &start, &p);
        for cap in &g.nodes {
            assert!(g.witness_is_valid(cap), "{cap}: {:?}", g.witness[cap]);
            let len = g.witness[cap].len();
            if len > 0 {
                assert!(
                    !some_subset_derives(&g, cap, len - 1),
                    "{cap} has a witness shorter than {:?}",
                    g.witness[cap]
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 50, "only {checked} non-trivial witnesses");
}

#[test]
fn rule_yields_never_in_requires() {
    let mut rng = common::rng(0x5eed_0005);
    for _ in 0..50 {
        let f = common::random_fixture(&mut rng);
        let all: BTreeSet<Capability> = common::capability_universe(&f).into_iter().collect();
        let g = analyze(&f, &Foothold::new(all), &PolicySet::empty());
        for e in &g.edges {
            assert!(!e.requires.contains(&e.yields), "{}", e.id);
        }
    }
}

#[test]
fn node_admin_actor_is_never_blocked_by_admin_only_host_path() {
    use sscs_sim::policy::{HostPathMode, PolicyRule, RuleKind};
    let f = canonical_fixture();
    let admin = Credential::new(builtin::NODE_ADMIN, CredentialLevel::ClusterAdmin);
    let policy = PolicySet::single(PolicyRule {
        id: "hp".into(),
        kind: RuleKind::HostPathRestriction {
            mode: HostPathMode::AdminOnly,
        },
    });
    let start = Foothold::new(caps(&["CrudIn(apps)"])).with_actor(admin);
    assert!(analyze(&f, &start, &policy).reaches(&Capability::ClusterAdmin));
    let anonymous = Foothold::new(caps(&["CrudIn(apps)"]));
    assert!(!analyze(&f, &anonymous, &policy).reaches(&Capability::ClusterAdmin));
}

#[test]
fn agreement_wrapper_matches_detailed_analysis() {
    let f = canonical_fixture();
    for s in builtin_scenarios() {
        assert_eq!(
            agrees_with_simulator(&f, &s, &PolicySet::empty()).unwrap(),
            analyze_scenario(&f, &s, &PolicySet::empty())
                .unwrap()
                .agrees
        );
    }
}
