//! Command-line front end. The binary is a thin wrapper over [`main_with`].
//!
//! Exit codes: 0 on success, 1 when a verdict misses `--expect`, 2 on any
//! usage, I/O or document error.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analyzer::{analyze, scenario_foothold, Capability, Foothold};
use crate::builtin::{self, builtin_scenarios, POLICY_FILES, SCENARIO_FILES};
use crate::fixture::load_fixture;
use crate::model::ClusterState;
use crate::policy::{load_policy, PolicySet};
use crate::report::{
    build_run_report, digest, render_analyze_text, render_run_text, render_threats_text,
    threat_model, AnalyzeReport,
};
use crate::scenario::{load_scenario, Outcome, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "sscs-sim",
    version,
    about = "Simulate CI/CD and cluster privilege-escalation attacks and their mitigations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run scenarios and report verdicts, analyzer agreement and threats.
    Run(RunArgs),
    /// Compute the capability closure from a starting set.
    Analyze(AnalyzeArgs),
    /// Emit one threat row per component kind in the fixture.
    ThreatModel(ThreatArgs),
    /// List the shipped scenarios and policies.
    ListBuiltins(ListArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Expect {
    Achieved,
    Blocked,
}

#[derive(Debug, Args)]
struct Output {
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Fixture document; the shipped canonical fixture when omitted.
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Scenario document path or shipped scenario id. Repeatable.
    #[arg(long)]
    scenario: Vec<String>,
    /// Include the four shipped scenarios.
    #[arg(long)]
    builtin: bool,
    /// Policy document path or shipped policy name.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long, value_enum)]
    expect: Option<Expect>,
    /// Run scenarios concurrently, each on its own fixture copy.
    #[arg(long)]
    parallel: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Starting capabilities such as `CrudIn(developer)`.
    capabilities: Vec<String>,
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Start from this scenario's foothold instead. Repeatable.
    #[arg(long)]
    scenario: Vec<String>,
    #[arg(long)]
    builtin: bool,
    #[arg(long)]
    policy: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct ThreatArgs {
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct ListArgs {
    #[command(flatten)]
    output: Output,
}

#[derive(Debug)]
struct Failure(String);

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

type CliResult<T> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn fixture_from(path: Option<&Path>) -> CliResult<ClusterState> {
    match path {
        None => Ok(builtin::canonical_fixture()),
        Some(p) => load_fixture(&read(p)?).map_err(|e| Failure(format!("{}: {e}", p.display()))),
    }
}

fn policy_from(arg: Option<&str>) -> CliResult<PolicySet> {
    let Some(arg) = arg else {
        return Ok(PolicySet::empty());
    };
    let path = Path::new(arg);
    let text = if path.exists() {
        read(path)?
    } else if let Some((_, text)) = POLICY_FILES
        .iter()
        .find(|(file, _)| file.strip_suffix(".yaml") == Some(arg))
    {
        (*text).to_owned()
    } else {
        return Err(Failure(format!("{arg}: no such file or shipped policy")));
    };
    load_policy(&text).map_err(|e| Failure(format!("{arg}: {e}")))
}

fn scenarios_from(args: &[String], with_builtins: bool) -> CliResult<Vec<Scenario>> {
    let mut out = if with_builtins {
        builtin_scenarios()
    } else {
        Vec::new()
    };
    for arg in args {
        let path = Path::new(arg);
        if path.exists() {
            let s = load_scenario(&read(path)?).map_err(|e| Failure(format!("{arg}: {e}")))?;
            out.push(s);
        } else if let Some(s) = builtin::builtin_scenario(arg) {
            out.push(s);
        } else {
            return Err(Failure(format!("{arg}: no such file or shipped scenario")));
        }
    }
    Ok(out)
}

fn emit<T: Serialize>(
    output: &Output,
    value: &T,
    text: impl FnOnce() -> String,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    let body = match output.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Text => text(),
    };
    match &output.out {
        Some(path) => {
            std::fs::write(path, body).map_err(|e| Failure(format!("{}: {e}", path.display())))
        }
        None => stdout
            .write_all(body.as_bytes())
            .map_err(|e| Failure(format!("stdout: {e}"))),
    }
}

fn cmd_run(args: RunArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let fixture = fixture_from(args.fixture.as_deref())?;
    let policy = policy_from(args.policy.as_deref())?;
    let scenarios = scenarios_from(&args.scenario, args.builtin)?;
    if scenarios.is_empty() {
        return Err(Failure(
            "run needs --builtin or at least one --scenario".into(),
        ));
    }
    let report = build_run_report(&fixture, &scenarios, &policy, args.parallel)
        .map_err(|e| Failure(e.to_string()))?;
    emit(&args.output, &report, || render_run_text(&report), stdout)?;
    let matches = |o: &Outcome| match args.expect {
        None => true,
        Some(Expect::Achieved) => o.is_achieved(),
        Some(Expect::Blocked) => o.is_blocked(),
    };
    Ok(if report.verdicts.iter().all(|v| matches(&v.outcome)) {
        EXIT_OK
    } else {
        EXIT_MISMATCH
    })
}

fn cmd_analyze(args: AnalyzeArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let fixture = fixture_from(args.fixture.as_deref())?;
    let policy = policy_from(args.policy.as_deref())?;
    let scenarios = scenarios_from(&args.scenario, args.builtin)?;
    let mut footholds = Vec::new();
    if scenarios.is_empty() || !args.capabilities.is_empty() {
        let mut caps = Vec::new();
        for raw in &args.capabilities {
            let cap: Capability = raw.parse().map_err(|e| Failure(format!("{e}")))?;
            cap.check_against(&fixture).map_err(Failure)?;
            caps.push(cap);
        }
        footholds.push(Foothold::new(caps));
    }
    for s in &scenarios {
        footholds.push(scenario_foothold(&fixture, s).map_err(|e| Failure(e.to_string()))?);
    }
    let reports: Vec<AnalyzeReport> = footholds
        .into_iter()
        .map(|foothold| AnalyzeReport {
            fixture_digest: digest(&fixture),
            policy_digest: digest(&policy),
            graph: analyze(&fixture, &foothold, &policy),
            foothold,
        })
        .collect();
    let text = || {
        reports
            .iter()
            .map(render_analyze_text)
            .collect::<Vec<_>>()
            .join("\n")
    };
    if reports.len() == 1 {
        emit(&args.output, &reports[0], text, stdout)?;
    } else {
        emit(&args.output, &reports, text, stdout)?;
    }
    Ok(EXIT_OK)
}

fn cmd_threat_model(args: ThreatArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let fixture = fixture_from(args.fixture.as_deref())?;
    let rows = threat_model(&fixture);
    emit(&args.output, &rows, || render_threats_text(&rows), stdout)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Builtins {
    scenarios: Vec<BuiltinScenario>,
    policies: Vec<&'static str>,
}

#[derive(Serialize)]
struct BuiltinScenario {
    id: String,
    title: String,
    principal: String,
    steps: usize,
}

fn cmd_list(args: ListArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let list = Builtins {
        scenarios: builtin_scenarios()
            .into_iter()
            .map(|s| BuiltinScenario {
                steps: s.steps.len(),
                id: s.id,
                title: s.title,
                principal: s.prerequisite.principal,
            })
            .collect(),
        policies: POLICY_FILES
            .iter()
            .map(|(f, _)| f.trim_end_matches(".yaml"))
            .collect(),
    };
    debug_assert_eq!(list.scenarios.len(), SCENARIO_FILES.len());
    let text = || {
        let mut out = String::from("scenarios:\n");
        for s in &list.scenarios {
            out.push_str(&format!(
                "  {:<22} {} ({} steps, as {})\n",
                s.id, s.title, s.steps, s.principal
            ));
        }
        out.push_str("policies:\n");
        for p in &list.policies {
            out.push_str(&format!("  {p}\n"));
        }
        out
    };
    emit(&args.output, &list, text, stdout)?;
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, stdout),
        Command::Analyze(a) => cmd_analyze(a, stdout),
        Command::ThreatModel(a) => cmd_threat_model(a, stdout),
        Command::ListBuiltins(a) => cmd_list(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}
