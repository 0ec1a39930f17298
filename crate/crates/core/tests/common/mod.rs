//! Test-only reference models, written independently of the library's
//! analysis and simulator.
//!
//! [`timeline`] plays a fixed-priority preemptive schedule one tick at a
//! time. It knows nothing about response-time equations or event queues,
//! so agreement with either is meaningful.

#![allow(dead_code)]

use std::path::PathBuf;

use rtreconf::{Component, Tick};

/// A periodic task for the oracle. Position in the slice given to
/// [`timeline`] is the priority (index 0 runs first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleTask {
    pub name: String,
    pub wcet: Tick,
    pub period: Tick,
    pub deadline: Tick,
}

impl OracleTask {
    pub fn new(name: &str, wcet: Tick, period: Tick, deadline: Tick) -> Self {
        Self { name: name.to_owned(), wcet, period, deadline }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Job {
    pub release: Tick,
    pub finish: Option<Tick>,
}

#[derive(Debug, Clone)]
pub struct Timeline {
    pub horizon: Tick,
    /// Index of the task holding the processor during `[t, t + 1)`.
    pub slots: Vec<Option<usize>>,
    pub jobs: Vec<Vec<Job>>,
    deadlines: Vec<Tick>,
}

impl Timeline {
    pub fn worst_response(&self, task: usize) -> Option<Tick> {
        self.jobs[task].iter().filter_map(|j| j.finish.map(|f| f - j.release)).max()
    }

    /// Jobs that finished late, or are still unfinished once their deadline
    /// has passed within the horizon.
    pub fn misses(&self, task: usize) -> usize {
        let d = self.deadlines[task];
        self.jobs[task]
            .iter()
            .filter(|j| match j.finish {
                Some(f) => f > j.release + d,
                None => j.release + d <= self.horizon,
            })
            .count()
    }

    pub fn total_misses(&self) -> usize {
        (0..self.jobs.len()).map(|i| self.misses(i)).sum()
    }
}

/// Synchronous release at 0, every job needing exactly its wcet.
pub fn timeline(tasks: &[OracleTask], horizon: Tick) -> Timeline {
    let mut backlog: Vec<Vec<(usize, Tick)>> = vec![Vec::new(); tasks.len()];
    let mut jobs: Vec<Vec<Job>> = vec![Vec::new(); tasks.len()];
    let mut slots = Vec::with_capacity(horizon as usize);
    for t in 0..horizon {
        for (i, task) in tasks.iter().enumerate() {
            if t % task.period == 0 {
                backlog[i].push((jobs[i].len(), task.wcet));
                jobs[i].push(Job { release: t, finish: None });
            }
        }
        let runner = backlog.iter().position(|b| !b.is_empty());
        if let Some(i) = runner {
            let (job, left) = &mut backlog[i][0];
            *left -= 1;
            if *left == 0 {
                jobs[i][*job].finish = Some(t + 1);
                backlog[i].remove(0);
            }
        }
        slots.push(runner);
    }
    Timeline { horizon, slots, jobs, deadlines: tasks.iter().map(|t| t.deadline).collect() }
}

/// Rate-monotonic order computed here rather than borrowed from the
/// library: shorter period first, then name.
pub fn rate_monotonic(components: &[Component]) -> Vec<OracleTask> {
    let mut tasks: Vec<OracleTask> = components
        .iter()
        .map(|c| OracleTask::new(c.id.as_str(), c.wcet, c.period, c.deadline))
        .collect();
    tasks.sort_by(|a, b| a.period.cmp(&b.period).then_with(|| a.name.cmp(&b.name)));
    tasks
}

/// Rate-monotonic tasks behind a management task that spends its whole
/// budget on every activation.
pub fn with_busy_management(components: &[Component], cost: Tick, period: Tick) -> Vec<OracleTask> {
    let mut tasks = vec![OracleTask::new("mgmt", cost, period, cost)];
    tasks.extend(rate_monotonic(components));
    tasks
}

pub fn lcm_of(periods: impl IntoIterator<Item = Tick>) -> Tick {
    fn gcd(a: Tick, b: Tick) -> Tick {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    periods.into_iter().fold(1, |acc, p| acc / gcd(acc, p) * p)
}

pub fn triple() -> Vec<Component> {
    vec![Component::new("A", 1, 4, 4), Component::new("B", 2, 6, 6), Component::new("C", 2, 12, 12)]
}

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn corpus() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .expect("scenario directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
}

/// Checks a highest-priority-mode trace against the simulator's
/// invariants. `wcet` maps component ids to their execution demand.
pub fn check_highest_mode_trace(
    events: &[rtreconf::TraceEvent],
    summary: &rtreconf::SimSummary,
    mgmt: rtreconf::ManagementTaskConfig,
    wcet: &std::collections::BTreeMap<String, Tick>,
) -> Result<(), String> {
    use std::collections::{BTreeMap, BTreeSet};

    use rtreconf::EventKind as K;

    let mut last = 0;
    let mut running: Option<(String, Tick)> = None;
    let mut consumed: BTreeMap<String, Tick> = BTreeMap::new();
    let mut ops_since_activation = 0;
    let mut exec_start: BTreeMap<String, (Tick, Tick, BTreeSet<String>)> = BTreeMap::new();
    // Request executing or awaiting commit: (id, targets, exec end if known).
    let mut open: Option<(String, BTreeSet<String>, Option<Tick>)> = None;

    for e in events {
        if e.time < last {
            return Err(format!("time went backwards at {e}"));
        }
        last = e.time;
        let stop = |running: &mut Option<(String, Tick)>, consumed: &mut BTreeMap<String, Tick>, who: &str| {
            match running.take() {
                Some((r, from)) if r == who => {
                    *consumed.entry(r).or_default() += e.time - from;
                    Ok(())
                }
                other => Err(format!("{e}: processor held by {other:?}")),
            }
        };
        match e.kind {
            K::JobStart | K::JobResume => {
                if let Some(r) = &running {
                    return Err(format!("{e}: {} still running", r.0));
                }
                if let Some((rid, targets, end)) = &open {
                    let forbidden = e.kind == K::JobStart || end.is_none();
                    if forbidden && targets.contains(&e.subject) {
                        return Err(format!("{e}: target of {rid} ran during its operation"));
                    }
                }
                running = Some((e.subject.clone(), e.time));
            }
            K::JobPreempt => stop(&mut running, &mut consumed, &e.subject)?,
            K::JobComplete => {
                stop(&mut running, &mut consumed, &e.subject)?;
                let used = consumed.remove(&e.subject).unwrap_or(0);
                if let Some(&c) = wcet.get(&e.subject) {
                    if used != c {
                        return Err(format!("{e}: consumed {used}, expected {c}"));
                    }
                }
            }
            K::MgmtActivate => ops_since_activation = 0,
            K::OpExecStart => {
                ops_since_activation += 1;
                if ops_since_activation > 1 {
                    return Err(format!("{e}: second operation in one activation"));
                }
                if let Some(r) = &running {
                    return Err(format!("{e}: {} still running", r.0));
                }
                let rid = e.get("request").unwrap_or_default().to_owned();
                let cost: Tick = e.get("cost").and_then(|c| c.parse().ok()).ok_or("cost")?;
                let targets: BTreeSet<String> = match e.get("targets") {
                    Some("-") | None => BTreeSet::new(),
                    Some(t) => t.split('+').map(str::to_owned).collect(),
                };
                if open.is_some() {
                    return Err(format!("{e}: previous operation not committed"));
                }
                open = Some((rid.clone(), targets.clone(), None));
                exec_start.insert(rid, (e.time, cost, targets));
                running = Some((format!("op:{}", e.get("request").unwrap_or_default()), e.time));
            }
            K::OpExecEnd => {
                let rid = e.get("request").unwrap_or_default();
                let &(start, cost, _) = exec_start.get(rid).ok_or("end without start")?;
                if e.time != start + cost {
                    return Err(format!("{e}: expected end at {}", start + cost));
                }
                stop(&mut running, &mut BTreeMap::new(), &format!("op:{rid}"))?;
                if let Some(o) = open.as_mut() {
                    o.2 = Some(e.time);
                }
            }
            K::OpCommit => {
                match &open {
                    Some((rid, _, Some(_))) if *rid == e.subject => open = None,
                    other => return Err(format!("{e}: unexpected commit, open {other:?}")),
                }
            }
            _ => {}
        }
    }

    for r in &summary.requests {
        let Some(latency) = r.latency() else { continue };
        let bound = mgmt.period + mgmt.cost + r.max_target_period.unwrap_or(0);
        if latency > bound {
            return Err(format!("request {} latency {latency} exceeds {bound}", r.id));
        }
        let cost = r.cost.unwrap_or(0);
        if latency < cost {
            return Err(format!("request {} latency {latency} below its cost {cost}", r.id));
        }
        if r.max_target_period.is_none() && r.commit != r.exec_end {
            return Err(format!("request {} targets nothing yet did not commit at exec end", r.id));
        }
    }
    for (id, s) in &summary.components {
        if s.completed > s.released {
            return Err(format!("{id} completed more jobs than released"));
        }
    }
    Ok(())
}
