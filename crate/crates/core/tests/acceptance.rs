//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails. Runs as part of `cargo test`; on its own with
//! `cargo test --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtreconf::admission::evaluate_request;
use rtreconf::analysis::ResponseTime;
use rtreconf::batch::{cross_check_all, random_task_set, random_task_sets, TaskSetShape};
use rtreconf::scenario::{parse_scenario, serialize_scenario};
use rtreconf::{
    compute_cmanag, period_from_utilization, period_from_window, register_operation,
    response_time, response_time_with_mgmt, unregister_operation, Component, EventKind,
    ManagementOpSpec, ManagementTaskConfig, OpKind, OpRegistry, Operation, Percent, Request,
    Simulation, SystemState, TaskSet, Tick,
};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn oracle_equivalence() -> Result<String, String> {
    let start = Instant::now();
    let sets = random_task_sets(0x5eed, 1000, &TaskSetShape::default());
    let results = cross_check_all(&sets);
    let mut disagreements = 0;
    let mut schedulable = 0;
    for (ts, r) in sets.iter().zip(&results) {
        let r = r.as_ref().map_err(|e| e.to_string())?;
        schedulable += r.rta_schedulable as usize;
        if !r.agrees() {
            disagreements += 1;
            eprintln!("  disagreement on {:?}: {r:?}", ts.components);
        }
    }
    let elapsed = start.elapsed();
    ensure(disagreements == 0, || format!("{disagreements} disagreements"))?;
    ensure(schedulable > 0 && schedulable < sets.len(), || "batch does not exercise both verdicts".into())?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {}", secs(elapsed)))?;
    Ok(format!("{} sets ({schedulable} schedulable), 0 disagreements in {}", sets.len(), secs(elapsed)))
}

fn reduction() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let shape = TaskSetShape { min_tasks: 1, max_tasks: 6, min_period: 2, max_period: 60 };
    let pairs = 1000;
    for n in 0..pairs {
        let ts = random_task_set(&mut rng, &shape);
        let cost = rng.gen_range(1..=5);
        let mgmt = ManagementTaskConfig::new(cost, rng.gen_range(cost..=60));
        let with = response_time_with_mgmt(&ts, &mgmt);

        let mut components: Vec<Component> = ts
            .components
            .iter()
            .cloned()
            .map(|mut c| {
                c.priority += 1;
                c
            })
            .collect();
        let mut synthetic = Component::new("mgmt", mgmt.cost, mgmt.period, mgmt.cost);
        synthetic.priority = 0;
        components.push(synthetic);
        let augmented = response_time(&TaskSet { components, bindings: vec![] });

        for r in &with.components {
            let a = augmented.get(&r.id).map(|a| a.response_time);
            ensure(a == Some(r.response_time), || format!("pair {n}: {} {:?} vs {a:?}", r.id, r.response_time))?;
        }
        ensure(with.schedulable == augmented.schedulable, || format!("pair {n}: verdicts differ"))?;
    }
    Ok(format!("{pairs} pairs identical component by component"))
}

fn worked_values() -> Result<String, String> {
    const FROZEN: [Tick; 3] = [2, 4, 11];
    let triple = common::triple();
    let tl = common::timeline(&common::with_busy_management(&triple, 1, 8), 24);
    let oracle: Vec<Tick> = (1..=3).map(|i| tl.worst_response(i).unwrap_or(0)).collect();
    ensure(oracle == FROZEN, || format!("timeline oracle gives {oracle:?}"))?;

    let ts = TaskSet::new(triple.clone(), vec![]);
    let report = response_time_with_mgmt(&ts, &ManagementTaskConfig::new(1, 8));
    let rta: Vec<Option<Tick>> = report.response_times();
    ensure(rta == FROZEN.map(Some), || format!("analysis gives {rta:?}"))?;

    let heavy = response_time_with_mgmt(&ts, &ManagementTaskConfig::new(3, 8));
    let b = heavy.get(&"B".into()).map(|r| r.response_time);
    ensure(b == Some(ResponseTime::Diverged { exceeded: 7 }), || format!("cost 3: B is {b:?}"))?;
    let late = common::timeline(&common::with_busy_management(&triple, 3, 8), 24).total_misses();
    ensure(late > 0, || "timeline oracle meets every deadline at cost 3".into())?;

    let reg = OpRegistry::from_specs([ManagementOpSpec::new(OpKind::Replace, 1)]).map_err(|e| e.to_string())?;
    let state = SystemState::new(ts, reg, 8);
    let kind: OpKind = "big_replace".parse().map_err(|_| "kind")?;
    let (after, d) = register_operation(&state, ManagementOpSpec::new(kind, 3)).map_err(|e| e.to_string())?;
    ensure(!d.accepted && after == state, || format!("cost-3 registration: {d:?}"))?;
    Ok("R = (2, 4, 11); cost-3 registration rejected (B reaches 7 > 6)".into())
}

fn random_request(rng: &mut ChaCha8Rng, state: &SystemState, n: usize) -> Request {
    let ids: Vec<_> = state.task_set.components.iter().map(|c| c.id.clone()).collect();
    let pick = ids.choose(rng).cloned().unwrap_or_else(|| "none".into());
    let t = rng.gen_range(4..=80);
    let c = rng.gen_range(1..=4).min(t);
    let (kind, payload) = match rng.gen_range(0..5) {
        0 => (OpKind::Add, Operation::Add { component: Component::new(format!("n{n}"), c, t, t), bindings: vec![] }),
        1 => (OpKind::Remove, Operation::Remove { target: pick }),
        2 => (OpKind::ModifyParams, Operation::ModifyParams { target: pick, wcet: c, period: t, deadline: t }),
        3 => (OpKind::Replace, Operation::Replace { replacement: Component::new(pick, c, t, t) }),
        _ => (OpKind::ModifyBindings, Operation::ModifyBindings { remove: vec![], add: vec![] }),
    };
    Request::new(format!("q{n}"), kind, payload, 0)
}

fn admission_fuzz() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let builtin = [OpKind::Add, OpKind::Remove, OpKind::ModifyParams, OpKind::ModifyBindings, OpKind::Replace];
    let steps = 20_000;
    let (mut accepted, mut rejected) = (0, 0);
    let mut state = SystemState::new(TaskSet::new(vec![Component::new("a", 1, 10, 10)], vec![]), OpRegistry::new(), 20);
    for step in 0..steps {
        let before = state.clone();
        let next = match rng.gen_range(0..3) {
            0 => {
                let kind = if rng.gen_bool(0.5) {
                    builtin.choose(&mut rng).cloned().unwrap_or(OpKind::Add)
                } else {
                    format!("x{}", rng.gen_range(0..4)).parse().map_err(|_| "kind")?
                };
                match register_operation(&state, ManagementOpSpec::new(kind, rng.gen_range(1..=6))) {
                    Ok((next, d)) if d.accepted => Some(next),
                    Ok((next, _)) => {
                        ensure(next == before, || format!("step {step}: rejected registration changed state"))?;
                        None
                    }
                    Err(_) => None,
                }
            }
            1 => {
                let kinds: Vec<OpKind> = state.registry.specs().map(|s| s.kind.clone()).collect();
                kinds.choose(&mut rng).and_then(|k| unregister_operation(&state, k).ok())
            }
            _ => {
                let req = random_request(&mut rng, &state, step);
                match evaluate_request(&state, &req) {
                    Ok((d, post)) if d.accepted => post,
                    _ => None,
                }
            }
        };
        match next {
            Some(next) => {
                accepted += 1;
                state = next;
                let report = response_time_with_mgmt(&state.task_set, &state.mgmt);
                ensure(report.schedulable, || format!("step {step}: accepted step left {state:?} unschedulable"))?;
            }
            None => {
                rejected += 1;
                ensure(state == before, || format!("step {step}: rejected step changed state"))?;
            }
        }
        ensure(state.mgmt.cost == compute_cmanag(&state.registry), || format!("step {step}: cost drifted"))?;
        ensure(state.mgmt.deadline == state.mgmt.cost, || format!("step {step}: deadline drifted"))?;
    }
    Ok(format!("{steps} steps ({accepted} accepted, {rejected} rejected), invariants held"))
}

fn stress() -> Result<String, String> {
    let text = std::fs::read_to_string(common::scenario_dir().join("stress.json")).map_err(|e| e.to_string())?;
    let scenario = parse_scenario(&text).map_err(|d| format!("{d:?}"))?;
    let cfg = scenario.sim_config(None).map_err(|d| d.to_string())?;
    let n = cfg.initial_state.task_set.len();
    let mgmt = cfg.initial_state.mgmt;
    let max_period = cfg.initial_state.task_set.components.iter().map(|c| c.period).max().unwrap_or(0);
    let wcet: BTreeMap<String, Tick> =
        cfg.initial_state.task_set.components.iter().map(|c| (c.id.to_string(), c.wcet)).collect();
    ensure(n == 100, || format!("{n} components"))?;
    ensure(scenario.metadata.tick_unit == "ms" && cfg.horizon == 120_000, || "not 120 simulated seconds".into())?;

    let start = Instant::now();
    let mut sim = Simulation::new(cfg).map_err(|e| e.to_string())?;
    let seg = sim.run_until(sim.horizon()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let s = &seg.summary;
    ensure(s.deadline_misses == 0, || format!("{} deadline misses", s.deadline_misses))?;
    ensure(s.commits >= 100, || format!("only {} replacements committed", s.commits))?;
    common::check_highest_mode_trace(&seg.events, s, mgmt, &wcet)?;
    ensure(elapsed < Duration::from_secs(120), || format!("took {}", secs(elapsed)))?;
    let (min, avg, max) = s.latency_stats().ok_or("no latencies")?;
    Ok(format!(
        "{} replacements, 0 misses, latency {min}/{avg:.1}/{max} ticks (bound {}), {}",
        s.commits,
        mgmt.period + mgmt.cost + max_period,
        secs(elapsed)
    ))
}

fn sizing() -> Result<String, String> {
    let p = period_from_utilization(2, Percent::whole(10)).map_err(|e| e.to_string())?;
    ensure(p == 20, || format!("(2, 10%) gives {p}"))?;
    let p = period_from_window(120_000, 60).map_err(|e| e.to_string())?;
    ensure(p == 2000, || format!("(120000, 60) gives {p}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let inputs = 1000;
    for _ in 0..inputs {
        let cost = rng.gen_range(1..=10_000u64);
        let den = rng.gen_range(1..=100u64);
        let u = Percent::new(rng.gen_range(1..=100 * den), den).map_err(|e| e.to_string())?;
        let t = period_from_utilization(cost, u).map_err(|e| e.to_string())?;
        let lhs = cost as u128 * 100 * u.denom() as u128;
        ensure(lhs <= t as u128 * u.numer() as u128, || format!("{cost}/{t} exceeds {u}%"))?;

        let count = rng.gen_range(1..=1000u64);
        let window = rng.gen_range(count..=1_000_000);
        let t = period_from_window(window, count).map_err(|e| e.to_string())?;
        ensure(window / t >= count, || format!("window {window}/{t} holds fewer than {count}"))?;
    }
    Ok(format!("(2,10%)->20, (120000,60)->2000, {inputs} random inputs within bounds"))
}

fn low_priority_interference() -> Result<String, String> {
    let run = |name: &str| -> Result<(u64, u64), String> {
        let text = std::fs::read_to_string(common::scenario_dir().join(name)).map_err(|e| e.to_string())?;
        let scenario = parse_scenario(&text).map_err(|d| format!("{d:?}"))?;
        let mut sim = Simulation::new(scenario.sim_config(None).map_err(|d| d.to_string())?).map_err(|e| e.to_string())?;
        let seg = sim.run_until(sim.horizon()).map_err(|e| e.to_string())?;
        let events = seg.events.iter().filter(|e| e.kind == EventKind::InterferenceDetected).count() as u64;
        ensure(events == seg.summary.interference, || "summary and trace disagree".into())?;
        Ok((events, seg.summary.commits))
    };
    let (low, low_commits) = run("interference-lowest.json")?;
    let (high, high_commits) = run("interference-highest.json")?;
    ensure(low >= 1, || "lowest mode shows no interference".into())?;
    ensure(high == 0, || format!("highest mode shows {high} interference events"))?;
    ensure(low_commits == 1 && high_commits == 1, || "replacement did not commit".into())?;
    Ok(format!("lowest mode: {low} interference events; highest mode: 0"))
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = common::scenario_dir().join("stress.json");
    let mut traces = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("run{run}.trace"));
        let status = Command::new(env!("CARGO_BIN_EXE_rtreconf"))
            .args(["simulate", "--seed", "17", "--scenario"])
            .arg(&scenario)
            .arg("--trace")
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?
            .status;
        ensure(status.success(), || format!("simulate exited with {status}"))?;
        traces.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure(traces[0] == traces[1], || "traces differ".into())?;

    let files = common::corpus();
    for path in &files {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let parsed = parse_scenario(&text).map_err(|d| format!("{}: {d:?}", path.display()))?;
        let again = serialize_scenario(&parsed);
        let reparsed = parse_scenario(&again).map_err(|d| format!("{d:?}"))?;
        ensure(reparsed == parsed && again == text, || format!("{} does not round-trip", path.display()))?;
    }
    Ok(format!("2 runs, {} identical trace bytes; {} corpus files round-trip", traces[0].len(), files.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("management reduction", reduction),
        ("worked fixed points", worked_values),
        ("admission soundness", admission_fuzz),
        ("stress scenario", stress),
        ("sizing formulas", sizing),
        ("low-priority interference", low_priority_interference),
        ("determinism and round-trip", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
