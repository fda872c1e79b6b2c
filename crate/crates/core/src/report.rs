//! Threat model rows, run reports and their text rendering.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analyzer::{analyze_scenario, EscalationGraph, Foothold, ScenarioAnalysis};
use crate::error::{AnalysisError, ScenarioError};
use crate::model::{ClusterState, ImageRole};
use crate::policy::PolicySet;
use crate::scenario::{run_scenario, Goal, Outcome, Scenario, ScenarioVerdict};

/// Component kinds a threat row can name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum System {
    Git,
    Jenkins,
    Docker,
    K8s,
    Strimzi,
    #[serde(rename = "Custom App")]
    CustomApp,
}

impl System {
    pub const ALL: [System; 6] = [
        System::Git,
        System::Jenkins,
        System::Docker,
        System::K8s,
        System::Strimzi,
        System::CustomApp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            System::Git => "Git",
            System::Jenkins => "Jenkins",
            System::Docker => "Docker",
            System::K8s => "K8s",
            System::Strimzi => "Strimzi",
            System::CustomApp => "Custom App",
        }
    }

    pub fn present_in(self, fixture: &ClusterState) -> bool {
        match self {
            System::Git => fixture.source_repo.is_some(),
            System::Jenkins => fixture.ci_server.is_some(),
            System::Docker => !fixture.registry.images.is_empty(),
            System::K8s => !fixture.nodes.is_empty(),
            System::Strimzi => !fixture.brokers.is_empty(),
            System::CustomApp => fixture.pods.iter().any(|p| {
                fixture
                    .registry
                    .images
                    .get(&p.image)
                    .is_some_and(|i| matches!(i.role, ImageRole::WebApp | ImageRole::Relay))
            }),
        }
    }

    fn entry(self) -> ThreatEntry {
        let (flaw, threat, mitigation) = match self {
            System::Git => (
                "Account Compromise",
                "Potential privileged account compromise",
                "Enable 2 factor auth",
            ),
            System::Jenkins => (
                "Control over CI/CD",
                "Account can be used to alter build configs",
                "Enable 2 factor auth",
            ),
            System::Docker => (
                "Docker Pull",
                "Potential infected container",
                "Implement vuln scanning for containers",
            ),
            System::K8s => (
                "DDOS",
                "Front end apps externally exposed",
                "Proper security checks (ex. check in place to prevent multiple auth)",
            ),
            System::Strimzi => (
                "Network Policy",
                "Default pods can access listeners",
                "Configure proper network policy",
            ),
            System::CustomApp => (
                "Non sanitized fields",
                "Potential for malicious input",
                "Patch to allow sanitized",
            ),
        };
        ThreatEntry {
            system: self,
            potential_flaw: flaw.into(),
            threat_description: threat.into(),
            mitigation: mitigation.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThreatEntry {
    pub system: System,
    pub potential_flaw: String,
    pub threat_description: String,
    pub mitigation: String,
}

/// One entry per component kind present in the fixture, in table order.
pub fn threat_model(fixture: &ClusterState) -> Vec<ThreatEntry> {
    System::ALL
        .into_iter()
        .filter(|s| s.present_in(fixture))
        .map(System::entry)
        .collect()
}

/// Components an attacker touched on the way to a goal.
pub fn systems_for_goal(goal: &Goal) -> BTreeSet<System> {
    use System::*;
    match goal {
        Goal::TopicDataRead { .. } => [K8s, Strimzi, CustomApp].into(),
        Goal::PayloadRouteServed { .. } => [Git, Jenkins, Docker, CustomApp].into(),
        Goal::ExternallyReachable { .. } => [K8s, Strimzi].into(),
        Goal::ClusterAdminObtained | Goal::CrossNamespacePodDeleted => [K8s].into(),
        Goal::ObservationContains { .. } => BTreeSet::new(),
        Goal::AllOf { goals } => goals.iter().flat_map(systems_for_goal).collect(),
    }
}

/// Hex SHA-256 of the value's canonical JSON form.
pub fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("document serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum AnalysisEntry {
    Analyzed(ScenarioAnalysis),
    #[serde(rename_all = "camelCase")]
    Unsupported {
        scenario_id: String,
        reason: String,
    },
}

impl AnalysisEntry {
    pub fn agrees(&self) -> Option<bool> {
        match self {
            AnalysisEntry::Analyzed(a) => Some(a.agrees),
            AnalysisEntry::Unsupported { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub fixture_digest: String,
    pub policy_digest: String,
    pub verdicts: Vec<ScenarioVerdict>,
    pub analyses: Vec<AnalysisEntry>,
    /// Threat rows for components involved in achieved goals.
    pub threats: Vec<ThreatEntry>,
}

fn analysis_entry(
    fixture: &ClusterState,
    scenario: &Scenario,
    policy: &PolicySet,
) -> Result<AnalysisEntry, ScenarioError> {
    match analyze_scenario(fixture, scenario, policy) {
        Ok(a) => Ok(AnalysisEntry::Analyzed(a)),
        Err(AnalysisError::Unsupported { scenario, reason }) => Ok(AnalysisEntry::Unsupported {
            scenario_id: scenario,
            reason,
        }),
        Err(AnalysisError::Scenario(e)) => Err(e),
        Err(e) => unreachable!("analysis of a scenario cannot fail with {e}"),
    }
}

/// Runs every scenario against its own copy of the fixture and assembles the
/// report. With `parallel`, scenarios run on the rayon pool; the report is
/// identical either way.
pub fn build_run_report(
    fixture: &ClusterState,
    scenarios: &[Scenario],
    policy: &PolicySet,
    parallel: bool,
) -> Result<RunReport, ScenarioError> {
    let one = |s: &Scenario| -> Result<(ScenarioVerdict, AnalysisEntry), ScenarioError> {
        Ok((
            run_scenario(fixture, s, policy)?,
            analysis_entry(fixture, s, policy)?,
        ))
    };
    let results: Vec<_> = if parallel {
        scenarios.par_iter().map(one).collect::<Result<_, _>>()?
    } else {
        scenarios.iter().map(one).collect::<Result<_, _>>()?
    };
    let mut involved = BTreeSet::new();
    for (s, (v, _)) in scenarios.iter().zip(&results) {
        if v.outcome.is_achieved() {
            involved.extend(systems_for_goal(&s.goal));
        }
    }
    let threats = threat_model(fixture)
        .into_iter()
        .filter(|t| involved.contains(&t.system))
        .collect();
    let (verdicts, analyses) = results.into_iter().unzip();
    Ok(RunReport {
        fixture_digest: digest(fixture),
        policy_digest: digest(policy),
        verdicts,
        analyses,
        threats,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalyzeReport {
    pub fixture_digest: String,
    pub policy_digest: String,
    pub foothold: Foothold,
    pub graph: EscalationGraph,
}

fn outcome_detail(outcome: &Outcome) -> String {
    match outcome {
        Outcome::Achieved | Outcome::GoalNotMet => String::new(),
        Outcome::Blocked {
            step_index,
            rule_id,
        } => format!("step {step_index} blocked by {rule_id}"),
        Outcome::Denied { step_index } => format!("step {step_index} denied by RBAC"),
        Outcome::Failed { step_index, reason } => format!("step {step_index}: {reason}"),
    }
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |out: &mut String, cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(out, header.to_vec());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(out, rule.iter().map(String::as_str).collect());
    for row in rows {
        line(out, row.iter().map(String::as_str).collect());
    }
}

pub fn render_threats_text(threats: &[ThreatEntry]) -> String {
    let rows: Vec<Vec<String>> = threats
        .iter()
        .map(|t| {
            vec![
                t.system.label().to_owned(),
                t.potential_flaw.clone(),
                t.threat_description.clone(),
                t.mitigation.clone(),
            ]
        })
        .collect();
    let mut out = String::new();
    table(
        &mut out,
        &[
            "System",
            "Potential Flaw",
            "Threat Description",
            "Mitigation",
        ],
        &rows,
    );
    out
}

fn render_graph(out: &mut String, graph: &EscalationGraph) {
    let gains: Vec<_> = graph.gains().collect();
    if graph.nodes.is_empty() {
        let _ = writeln!(out, "closure: (empty)");
        return;
    }
    let initial: Vec<String> = graph.initial.iter().map(ToString::to_string).collect();
    let _ = writeln!(out, "initial: {}", initial.join(", "));
    if gains.is_empty() {
        let _ = writeln!(out, "gains: (none)");
    }
    for cap in gains {
        let _ = writeln!(out, "gain {cap}: {}", graph.witness[cap].join(" -> "));
    }
}

pub fn render_analyze_text(report: &AnalyzeReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "fixture {}", report.fixture_digest);
    let _ = writeln!(out, "policy  {}", report.policy_digest);
    render_graph(&mut out, &report.graph);
    out
}

pub fn render_run_text(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "fixture {}", report.fixture_digest);
    let _ = writeln!(out, "policy  {}", report.policy_digest);
    let _ = writeln!(out);
    let rows: Vec<Vec<String>> = report
        .verdicts
        .iter()
        .zip(&report.analyses)
        .map(|(v, a)| {
            let agreement = match a.agrees() {
                Some(true) => "yes",
                Some(false) => "NO",
                None => "n/a",
            };
            vec![
                v.scenario_id.clone(),
                v.outcome.label().to_owned(),
                format!("{}", v.trace.len()),
                agreement.to_owned(),
                outcome_detail(&v.outcome),
            ]
        })
        .collect();
    table(
        &mut out,
        &["scenario", "outcome", "steps", "analyzer agrees", "detail"],
        &rows,
    );
    for a in &report.analyses {
        let _ = writeln!(out);
        match a {
            AnalysisEntry::Analyzed(a) => {
                let _ = writeln!(out, "[{}]", a.scenario_id);
                render_graph(&mut out, &a.graph);
            }
            AnalysisEntry::Unsupported {
                scenario_id,
                reason,
            } => {
                let _ = writeln!(out, "[{scenario_id}] analysis unsupported: {reason}");
            }
        }
    }
    if !report.threats.is_empty() {
        let _ = writeln!(out);
        out.push_str(&render_threats_text(&report.threats));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{builtin_scenarios, canonical_fixture};

    #[test]
    fn canonical_threat_model_has_six_rows() {
        let rows = threat_model(&canonical_fixture());
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[1].system, System::Jenkins);
        assert_eq!(
            rows[1].threat_description,
            "Account can be used to alter build configs"
        );
    }

    #[test]
    fn absent_ci_server_drops_jenkins_row() {
        let mut f = canonical_fixture();
        f.ci_server = None;
        let rows = threat_model(&f);
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.system != System::Jenkins));
    }

    #[test]
    fn second_broker_keeps_one_strimzi_row() {
        let mut f = canonical_fixture();
        let mut twin = f.brokers[0].clone();
        twin.name = "strimzi-2".into();
        f.brokers.push(twin);
        let rows = threat_model(&f);
        assert_eq!(
            rows.iter().filter(|r| r.system == System::Strimzi).count(),
            1
        );
    }

    #[test]
    fn digests_are_stable() {
        let a = digest(&canonical_fixture());
        assert_eq!(a, digest(&canonical_fixture()));
        assert_eq!(a.len(), 64);
        assert_ne!(a, digest(&PolicySet::empty()));
    }

    #[test]
    fn json_report_round_trips() {
        let f = canonical_fixture();
        let r = build_run_report(&f, &builtin_scenarios(), &PolicySet::empty(), false).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<RunReport>(&text).unwrap(), r);
    }

    #[test]
    fn parallel_matches_sequential() {
        let f = canonical_fixture();
        let s = builtin_scenarios();
        let p = crate::builtin::all_mitigations();
        assert_eq!(
            build_run_report(&f, &s, &p, true).unwrap(),
            build_run_report(&f, &s, &p, false).unwrap()
        );
    }
}
