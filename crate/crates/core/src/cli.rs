//! Command-line front end. Each command returns its output text and exit
//! status so it can be driven from tests as well as from the binary.
//!
//! Exit statuses: 0 success (schedulable, accepted, no misses), 1 analytic
//! negative, 2 usage or validation error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::admission::register_operation;
use crate::analysis::{
    period_from_utilization, period_from_window, response_time_with_mgmt, snap_period_to_existing,
    Percent, ResponseTimeReport,
};
use crate::model::{ManagementOpSpec, ManagementTaskConfig, OpKind, Tick};
use crate::scenario::{parse_scenario, Diagnostic, Scenario};
use crate::simulator::{format_trace, Simulation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rtreconf", version, about = "Schedulability analysis, admission control and simulation of reconfigurable component sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Response times with management interference and a verdict.
    Analyze(ScenarioArg),
    /// Acceptance test for registering a new management operation.
    Admit {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        op_kind: OpKind,
        #[arg(long)]
        op_cost: Tick,
    },
    /// Runs the discrete-event simulation and writes the trace.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Last simulated tick; defaults to the scenario horizon.
        #[arg(long)]
        until: Option<Tick>,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sizes the management task period.
    MgmtPeriod {
        #[arg(long)]
        cost: Option<Tick>,
        #[arg(long)]
        util: Option<Percent>,
        #[arg(long)]
        window: Option<Tick>,
        #[arg(long)]
        count: Option<u64>,
        /// Snap tolerance in percent; needs --scenario for the periods.
        #[arg(long)]
        snap: Option<Percent>,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ScenarioArg {
    #[arg(long)]
    pub scenario: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandOutput {
    pub stdout: String,
    pub stderr: String,
    pub status: i32,
}

impl CommandOutput {
    fn ok(stdout: String, status: i32) -> Self {
        Self { stdout, stderr: String::new(), status }
    }

    fn usage(stderr: impl Into<String>) -> Self {
        Self { stdout: String::new(), stderr: stderr.into(), status: EXIT_USAGE }
    }

    fn diagnostics(path: &Path, diags: &[Diagnostic]) -> Self {
        let mut err = String::new();
        for d in diags {
            let _ = writeln!(err, "{}: {d}", path.display());
        }
        Self::usage(err)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> CommandOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let status = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if status == EXIT_OK {
                CommandOutput::ok(text, EXIT_OK)
            } else {
                CommandOutput::usage(text)
            };
        }
    };
    execute(cli.command)
}

pub fn execute(command: Command) -> CommandOutput {
    match command {
        Command::Analyze(arg) => with_scenario(&arg.scenario, cmd_analyze),
        Command::Admit { scenario, op_kind, op_cost } => {
            with_scenario(&scenario.scenario, |s| cmd_admit(s, op_kind, op_cost))
        }
        Command::Simulate { scenario, until, trace, seed } => {
            with_scenario(&scenario.scenario, |s| cmd_simulate(s, until, trace.as_deref(), seed))
        }
        Command::MgmtPeriod { cost, util, window, count, snap, scenario } => {
            let loaded = match scenario.as_deref().map(load_scenario).transpose() {
                Ok(s) => s,
                Err(out) => return out,
            };
            let window = match (window, count) {
                (Some(w), Some(n)) => Some((w, n)),
                (None, None) => None,
                _ => return CommandOutput::usage("error: --window and --count must be given together\n"),
            };
            cmd_mgmt_period(cost, util, window, snap, loaded.as_ref())
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, CommandOutput> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CommandOutput::usage(format!("{}: {e}\n", path.display())))?;
    parse_scenario(&text).map_err(|d| CommandOutput::diagnostics(path, &d))
}

fn with_scenario(path: &Path, f: impl FnOnce(&Scenario) -> CommandOutput) -> CommandOutput {
    match load_scenario(path) {
        Ok(s) => f(&s),
        Err(out) => out,
    }
}

fn mgmt_line(m: &ManagementTaskConfig) -> String {
    if m.is_inert() {
        "management: C_manag=0 (inert)".to_owned()
    } else {
        format!("management: C_manag={} T_manag={} D_manag={}", m.cost, m.period, m.deadline)
    }
}

fn report_table(out: &mut String, scenario: &Scenario, report: &ResponseTimeReport) {
    let _ = writeln!(out, "{:<16} {:>8} {:>8} {:>8} {:>5} {:>14}  ok", "component", "C", "T", "D", "prio", "R");
    let ts = scenario.task_set();
    for r in &report.components {
        let c = ts.get(&r.id).expect("reported component exists");
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>8} {:>8} {:>5} {:>14}  {}",
            r.id.as_str(),
            c.wcet,
            c.period,
            c.deadline,
            r.priority,
            r.response_time.to_string(),
            if r.meets_deadline() { "yes" } else { "NO" }
        );
    }
}

/// Per-component response times, management parameters and verdict.
pub fn cmd_analyze(scenario: &Scenario) -> CommandOutput {
    let state = match scenario.system_state() {
        Ok(s) => s,
        Err(d) => return CommandOutput::usage(format!("{d}\n")),
    };
    let report = response_time_with_mgmt(&state.task_set, &state.mgmt);
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {} (tick unit: {})", scenario.metadata.name, scenario.metadata.tick_unit);
    let _ = writeln!(out, "{}", mgmt_line(&state.mgmt));
    report_table(&mut out, scenario, &report);
    let verdict = if report.schedulable { "SCHEDULABLE" } else { "UNSCHEDULABLE" };
    let _ = writeln!(out, "verdict: {verdict}");
    CommandOutput::ok(out, if report.schedulable { EXIT_OK } else { EXIT_NEGATIVE })
}

/// Acceptance test for registering `kind` with cost `cost`.
pub fn cmd_admit(scenario: &Scenario, kind: OpKind, cost: Tick) -> CommandOutput {
    let state = match scenario.system_state() {
        Ok(s) => s,
        Err(d) => return CommandOutput::usage(format!("{d}\n")),
    };
    if state.mgmt.period == 0 {
        return CommandOutput::usage("scenario has no management period; add a management block\n");
    }
    let (_, decision) = match register_operation(&state, ManagementOpSpec::new(kind.clone(), cost)) {
        Ok(r) => r,
        Err(e) => return CommandOutput::usage(format!("error: {e}\n")),
    };
    let mut out = String::new();
    let verdict = if decision.accepted { "ACCEPTED" } else { "REJECTED" };
    let _ = writeln!(out, "operation: {kind} (cost {cost})");
    let _ = writeln!(out, "decision: {verdict} ({})", decision.reason);
    let _ = writeln!(
        out,
        "C_manag: {} -> {} (T_manag={})",
        decision.before.cost, decision.after.cost, decision.after.period
    );
    if let Some(report) = &decision.report {
        report_table(&mut out, scenario, report);
    }
    CommandOutput::ok(out, if decision.accepted { EXIT_OK } else { EXIT_NEGATIVE })
}

/// Runs the scenario's simulation block up to `until` (default: horizon).
pub fn cmd_simulate(scenario: &Scenario, until: Option<Tick>, trace: Option<&Path>, seed: Option<u64>) -> CommandOutput {
    let cfg = match scenario.sim_config(seed) {
        Ok(c) => c,
        Err(d) => return CommandOutput::usage(format!("{d}\n")),
    };
    let until = until.unwrap_or(cfg.horizon);
    let mut sim = match Simulation::new(cfg) {
        Ok(s) => s,
        Err(e) => return CommandOutput::usage(format!("error: {e}\n")),
    };
    let segment = match sim.run_until(until) {
        Ok(s) => s,
        Err(e) => return CommandOutput::usage(format!("error: {e}\n")),
    };
    let mut stderr = String::new();
    for w in sim.warnings() {
        let _ = writeln!(stderr, "warning: {w}");
    }
    if let Some(path) = trace {
        if let Err(e) = std::fs::write(path, format_trace(sim.trace())) {
            let _ = writeln!(stderr, "error: {}: {e}", path.display());
            return CommandOutput { stdout: String::new(), stderr, status: EXIT_USAGE };
        }
    }

    let s = &segment.summary;
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {} (tick unit: {})", scenario.metadata.name, scenario.metadata.tick_unit);
    let _ = writeln!(out, "simulated: 0..={}", s.time);
    let _ = writeln!(out, "{:<16} {:>9} {:>9} {:>7} {:>7} {:>9}", "component", "released", "completed", "missed", "dropped", "worst R");
    for (id, c) in &s.components {
        let worst = c.worst_response.map_or_else(|| "-".to_owned(), |w| w.to_string());
        let _ = writeln!(
            out,
            "{:<16} {:>9} {:>9} {:>7} {:>7} {:>9}",
            id.as_str(),
            c.released,
            c.completed,
            c.missed,
            c.dropped,
            worst
        );
    }
    let _ = writeln!(
        out,
        "requests: {} arrived, {} committed, {} rejected, {} overflowed",
        s.requests.len(),
        s.commits,
        s.rejections,
        s.overflows
    );
    match s.latency_stats() {
        Some((min, mean, max)) => {
            let _ = writeln!(out, "latency: min={min} avg={mean:.3} max={max}");
        }
        None => {
            let _ = writeln!(out, "latency: -");
        }
    }
    let _ = writeln!(out, "management: {} activations, {} operations executed", s.activations, s.ops_executed);
    let _ = writeln!(out, "interference_detected: {}", s.interference);
    let _ = writeln!(out, "deadline_misses: {}", s.deadline_misses);
    let status = if s.deadline_misses == 0 { EXIT_OK } else { EXIT_NEGATIVE };
    CommandOutput { stdout: out, stderr, status }
}

/// Computes the management period from exactly one sizing mode.
pub fn cmd_mgmt_period(
    cost: Option<Tick>,
    util: Option<Percent>,
    window: Option<(Tick, u64)>,
    snap: Option<Percent>,
    scenario: Option<&Scenario>,
) -> CommandOutput {
    let period = match (util, window) {
        (Some(_), Some(_)) => return CommandOutput::usage("error: --util and --window/--count are mutually exclusive\n"),
        (None, None) => return CommandOutput::usage("error: one of --util or --window with --count is required\n"),
        (Some(u), None) => {
            let Some(c) = cost else {
                return CommandOutput::usage("error: --util needs --cost\n");
            };
            period_from_utilization(c, u)
        }
        (None, Some((w, n))) => period_from_window(w, n),
    };
    let mut period = match period {
        Ok(p) => p,
        Err(e) => return CommandOutput::usage(format!("error: {e}\n")),
    };
    let mut out = String::new();
    if let Some(tol) = snap {
        let Some(s) = scenario else {
            return CommandOutput::usage("error: --snap needs --scenario\n");
        };
        let snapped = snap_period_to_existing(period, &s.task_set(), tol);
        let _ = writeln!(out, "candidate: {period}");
        period = snapped;
    }
    let _ = writeln!(out, "T_manag: {period}");
    if let Some(c) = cost {
        let _ = writeln!(out, "utilization: {:.4}%", 100.0 * c as f64 / period as f64);
    }
    CommandOutput::ok(out, EXIT_OK)
}
