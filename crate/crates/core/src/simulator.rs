//! Deterministic discrete-event simulation of a component set under
//! preemptive fixed-priority scheduling, served by a periodic management
//! task.
//!
//! Time advances from event to event (releases, completions, deadlines,
//! management activations, request arrivals); between two events the
//! processor is held by a single entity. All components and the management
//! task are released synchronously at tick 0.
//!
//! Per activation the management task takes at most one queued request and
//! executes it for the registered cost of its kind. The structural change
//! itself commits once every targeted component sits between jobs: a
//! targeted job that was already running finishes first, and targeted
//! components start no new job until the commit.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admission::{evaluate_request, AdmissionError};
use crate::analysis::{assign_rms_priorities, compute_cmanag, response_time_with_mgmt};
use crate::model::{
    apply_operation, validate_taskset, Component, ComponentId, OpKind, Operation, Request,
    RequestId, SystemState, Tick, Violation,
};

/// Priority of the management task's operation executions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityMode {
    /// Top priority, non-preemptible.
    #[default]
    Highest,
    /// Background priority, preemptible by every component. Only useful to
    /// demonstrate what goes wrong without the protocol.
    Lowest,
}

/// Seeded sporadic request generator configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SporadicSource {
    pub seed: u64,
    pub mit: Tick,
    pub kinds: Vec<(OpKind, u32)>,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub initial_state: SystemState,
    pub horizon: Tick,
    pub mgmt_priority_mode: PriorityMode,
    pub queue_capacity: usize,
    /// Requests arriving at their `enqueue_time`.
    pub scripted: Vec<Request>,
    /// Generated requests are identity-preserving replacements of randomly
    /// chosen initial components.
    pub sporadic: Option<SporadicSource>,
    /// When false only the summary is kept.
    pub record_trace: bool,
}

impl SimConfig {
    pub fn new(initial_state: SystemState, horizon: Tick) -> Self {
        Self {
            initial_state,
            horizon,
            mgmt_priority_mode: PriorityMode::Highest,
            queue_capacity: 16,
            scripted: Vec::new(),
            sporadic: None,
            record_trace: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid initial state: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidState(Vec<Violation>),
    #[error("inconsistent management task: {0}")]
    InvalidManagement(String),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("queue capacity must be at least 1")]
    ZeroCapacity,
    #[error("time {at} is before the current time {now}")]
    TimeInPast { at: Tick, now: Tick },
    #[error("time {at} is beyond the horizon {horizon}")]
    BeyondHorizon { at: Tick, horizon: Tick },
    #[error("sporadic generator needs at least one kind with a positive weight")]
    EmptyKinds,
    #[error("sporadic generator needs a minimum inter-arrival time of at least 1")]
    ZeroMit,
    #[error("sporadic generator cannot synthesize payloads for kind {0}")]
    UnsupportedSporadicKind(OpKind),
    #[error("sporadic generator needs at least one component to replace")]
    NothingToReplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    JobRelease,
    JobStart,
    JobPreempt,
    JobResume,
    JobComplete,
    DeadlineMiss,
    MgmtActivate,
    MgmtIdle,
    OpExecStart,
    OpExecEnd,
    OpCommit,
    RequestEnqueued,
    RequestRejected,
    QueueOverflow,
    InterferenceDetected,
}

impl EventKind {
    pub const ALL: [EventKind; 15] = [
        EventKind::JobRelease,
        EventKind::JobStart,
        EventKind::JobPreempt,
        EventKind::JobResume,
        EventKind::JobComplete,
        EventKind::DeadlineMiss,
        EventKind::MgmtActivate,
        EventKind::MgmtIdle,
        EventKind::OpExecStart,
        EventKind::OpExecEnd,
        EventKind::OpCommit,
        EventKind::RequestEnqueued,
        EventKind::RequestRejected,
        EventKind::QueueOverflow,
        EventKind::InterferenceDetected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::JobRelease => "job_release",
            EventKind::JobStart => "job_start",
            EventKind::JobPreempt => "job_preempt",
            EventKind::JobResume => "job_resume",
            EventKind::JobComplete => "job_complete",
            EventKind::DeadlineMiss => "deadline_miss",
            EventKind::MgmtActivate => "mgmt_activate",
            EventKind::MgmtIdle => "mgmt_idle",
            EventKind::OpExecStart => "op_exec_start",
            EventKind::OpExecEnd => "op_exec_end",
            EventKind::OpCommit => "op_commit",
            EventKind::RequestEnqueued => "request_enqueued",
            EventKind::RequestRejected => "request_rejected",
            EventKind::QueueOverflow => "queue_overflow",
            EventKind::InterferenceDetected => "interference_detected",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Subject of management-task events that concern no request.
pub const MGMT_SUBJECT: &str = "mgmt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Tick,
    pub kind: EventKind,
    pub subject: String,
    pub detail: Vec<(&'static str, String)>,
}

impl TraceEvent {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.detail.iter().find(|(k, _)| *k == key).map(|(_, v)| v.as_str())
    }
}

/// One line: `time<TAB>kind<TAB>subject<TAB>k=v,k=v`, with `-` standing in
/// for an empty detail list.
impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t", self.time, self.kind, self.subject)?;
        if self.detail.is_empty() {
            return f.write_str("-");
        }
        for (i, (k, v)) in self.detail.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Renders events in the line format, newline-terminated.
pub fn format_trace(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComponentStats {
    pub released: u64,
    pub completed: u64,
    pub missed: u64,
    /// Released but never started before the component was removed.
    pub dropped: u64,
    pub worst_response: Option<Tick>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestStatus {
    Queued,
    Rejected,
    Overflowed,
    Executing,
    AwaitingCommit,
    Committed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestRecord {
    pub id: RequestId,
    pub kind: OpKind,
    pub enqueue: Tick,
    pub status: RequestStatus,
    /// Registered cost of the request's kind, once it is dequeued.
    pub cost: Option<Tick>,
    pub exec_start: Option<Tick>,
    pub exec_end: Option<Tick>,
    pub commit: Option<Tick>,
    /// Longest period among the live components the request targeted.
    pub max_target_period: Option<Tick>,
}

impl RequestRecord {
    pub fn latency(&self) -> Option<Tick> {
        self.commit.map(|c| c - self.enqueue)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimSummary {
    pub time: Tick,
    pub components: BTreeMap<ComponentId, ComponentStats>,
    pub requests: Vec<RequestRecord>,
    pub deadline_misses: u64,
    pub rejections: u64,
    pub overflows: u64,
    pub interference: u64,
    pub activations: u64,
    pub ops_executed: u64,
    pub commits: u64,
}

impl SimSummary {
    /// `(min, mean, max)` latency over committed requests.
    pub fn latency_stats(&self) -> Option<(Tick, f64, Tick)> {
        let lat: Vec<Tick> = self.requests.iter().filter_map(RequestRecord::latency).collect();
        let min = *lat.iter().min()?;
        let max = *lat.iter().max()?;
        let mean = lat.iter().sum::<Tick>() as f64 / lat.len() as f64;
        Some((min, mean, max))
    }
}

/// Result of handing a request to the simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnqueueOutcome {
    /// Arrival lies in the future; admission happens when it arrives.
    Scheduled,
    Enqueued { position: usize },
    Rejected { reason: String },
    Overflow,
}

/// Trace events produced by one [`Simulation::run_until`] call together
/// with the summary at its end.
#[derive(Debug, Clone)]
pub struct RunSegment {
    pub events: Vec<TraceEvent>,
    pub summary: SimSummary,
}

#[derive(Debug, Clone)]
struct Job {
    index: u64,
    release: Tick,
    deadline: Tick,
    remaining: Tick,
    started: bool,
    missed: bool,
}

#[derive(Debug, Clone)]
struct TaskRuntime {
    component: Component,
    next_release: Tick,
    jobs: VecDeque<Job>,
    released: u64,
}

impl TaskRuntime {
    fn new(component: Component, first_release: Tick) -> Self {
        Self { component, next_release: first_release, jobs: VecDeque::new(), released: 0 }
    }

    fn in_flight(&self) -> bool {
        self.jobs.front().is_some_and(|j| j.started)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Executing,
    AwaitingCommit,
}

#[derive(Debug, Clone)]
struct OpRun {
    request: Request,
    record: usize,
    remaining: Tick,
    started: bool,
    phase: Phase,
    targets: BTreeSet<ComponentId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Entity {
    Job(ComponentId),
    Op,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    horizon: Tick,
    mode: PriorityMode,
    capacity: usize,
    record_trace: bool,
    now: Tick,
    tick_done: bool,
    live: SystemState,
    /// State after every accepted, not yet committed request.
    projected: SystemState,
    /// Ordered by rank.
    tasks: Vec<TaskRuntime>,
    queue: VecDeque<(Request, usize)>,
    arrivals: BTreeMap<(Tick, u64), Request>,
    arrival_seq: u64,
    op: Option<OpRun>,
    next_activation: Option<Tick>,
    running: Option<Entity>,
    trace: Vec<TraceEvent>,
    cursor: usize,
    summary: SimSummary,
    record_index: BTreeMap<RequestId, usize>,
    warnings: Vec<String>,
}

/// Creates a simulation at tick 0 with every component and the management
/// task released synchronously.
pub fn new_simulation(cfg: SimConfig) -> Result<Simulation, SimError> {
    Simulation::new(cfg)
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        let state = cfg.initial_state;
        let violations = validate_taskset(&state.task_set);
        if !violations.is_empty() {
            return Err(SimError::InvalidState(violations));
        }
        let mgmt = state.mgmt;
        if mgmt.cost != compute_cmanag(&state.registry) {
            return Err(SimError::InvalidManagement(format!(
                "cost {} differs from the registry maximum {}",
                mgmt.cost,
                compute_cmanag(&state.registry)
            )));
        }
        if mgmt.deadline != mgmt.cost {
            return Err(SimError::InvalidManagement("deadline differs from cost".into()));
        }
        if !mgmt.is_inert() && mgmt.period == 0 {
            return Err(SimError::InvalidManagement("period is zero".into()));
        }
        if cfg.horizon == 0 {
            return Err(SimError::ZeroHorizon);
        }
        if cfg.queue_capacity == 0 {
            return Err(SimError::ZeroCapacity);
        }

        let live = SystemState { task_set: assign_rms_priorities(&state.task_set), ..state };
        let mut warnings = Vec::new();
        if !response_time_with_mgmt(&live.task_set, &live.mgmt).schedulable {
            warnings.push("initial state is not schedulable with the management task".to_owned());
        }
        let tasks = live.task_set.components.iter().map(|c| TaskRuntime::new(c.clone(), 0)).collect();
        let components = live
            .task_set
            .components
            .iter()
            .map(|c| (c.id.clone(), ComponentStats::default()))
            .collect();

        let mut sim = Self {
            horizon: cfg.horizon,
            mode: cfg.mgmt_priority_mode,
            capacity: cfg.queue_capacity,
            record_trace: cfg.record_trace,
            now: 0,
            tick_done: false,
            projected: live.clone(),
            next_activation: (!live.mgmt.is_inert()).then_some(0),
            live,
            tasks,
            queue: VecDeque::new(),
            arrivals: BTreeMap::new(),
            arrival_seq: 0,
            op: None,
            running: None,
            trace: Vec::new(),
            cursor: 0,
            summary: SimSummary { components, ..SimSummary::default() },
            record_index: BTreeMap::new(),
            warnings,
        };

        let mut requests = cfg.scripted;
        if let Some(src) = cfg.sporadic {
            let initial: Vec<Component> = sim.live.task_set.components.clone();
            requests.extend(generate_sporadic_requests(
                src.seed,
                src.mit,
                cfg.horizon,
                &src.kinds,
                identity_replacements(&initial)?,
            )?);
        }
        for req in requests {
            sim.push_arrival(req.enqueue_time, req);
        }
        Ok(sim)
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn horizon(&self) -> Tick {
        self.horizon
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// The committed system state.
    pub fn state(&self) -> &SystemState {
        &self.live
    }

    /// Jobs released and not yet completed.
    pub fn pending_jobs(&self) -> usize {
        self.tasks.iter().map(|t| t.jobs.len()).sum()
    }

    /// Requests waiting in the management queue.
    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    pub fn pending_activation(&self) -> Option<Tick> {
        self.next_activation
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn summary(&self) -> SimSummary {
        SimSummary { time: self.now, ..self.summary.clone() }
    }

    /// Hands a request to the simulation at time `at`. Arrivals at the
    /// current tick are admitted immediately and are visible to an
    /// activation at that same tick if it has not been processed yet.
    pub fn enqueue_request(&mut self, req: Request, at: Tick) -> Result<EnqueueOutcome, SimError> {
        if at < self.now {
            return Err(SimError::TimeInPast { at, now: self.now });
        }
        let req = Request { enqueue_time: at, ..req };
        if at == self.now {
            Ok(self.handle_arrival(req))
        } else {
            self.push_arrival(at, req);
            Ok(EnqueueOutcome::Scheduled)
        }
    }

    /// Simulates every event up to and including tick `t`.
    pub fn run_until(&mut self, t: Tick) -> Result<RunSegment, SimError> {
        if t > self.horizon {
            return Err(SimError::BeyondHorizon { at: t, horizon: self.horizon });
        }
        if t < self.now {
            return Err(SimError::TimeInPast { at: t, now: self.now });
        }
        loop {
            if !self.tick_done {
                self.process_tick();
                self.tick_done = true;
            }
            let next = self.next_event_time();
            if next > t {
                self.advance(t - self.now);
                self.now = t;
                break;
            }
            self.advance(next - self.now);
            self.now = next;
            self.tick_done = false;
        }
        let events = self.trace[self.cursor..].to_vec();
        self.cursor = self.trace.len();
        Ok(RunSegment { events, summary: self.summary() })
    }

    fn push_arrival(&mut self, at: Tick, req: Request) {
        self.arrivals.insert((at, self.arrival_seq), req);
        self.arrival_seq += 1;
    }

    fn emit<F>(&mut self, kind: EventKind, subject: &str, detail: F)
    where
        F: FnOnce() -> Vec<(&'static str, String)>,
    {
        if self.record_trace {
            self.trace.push(TraceEvent {
                time: self.now,
                kind,
                subject: subject.to_owned(),
                detail: detail(),
            });
        }
    }

    fn task_index(&self, id: &ComponentId) -> Option<usize> {
        self.tasks.iter().position(|t| &t.component.id == id)
    }

    fn stats(&mut self, id: &ComponentId) -> &mut ComponentStats {
        self.summary.components.entry(id.clone()).or_default()
    }

    fn advance(&mut self, dt: Tick) {
        if dt == 0 {
            return;
        }
        match &self.running {
            Some(Entity::Job(id)) => {
                let i = self.task_index(id).expect("running task exists");
                let job = self.tasks[i].jobs.front_mut().expect("running job exists");
                job.remaining -= dt;
            }
            Some(Entity::Op) => {
                let op = self.op.as_mut().expect("running operation exists");
                op.remaining -= dt;
            }
            None => {}
        }
    }

    fn process_tick(&mut self) {
        self.complete_running();
        self.try_commit();
        self.check_deadlines();
        while let Some(entry) = self.arrivals.first_entry() {
            if entry.key().0 > self.now {
                break;
            }
            let req = entry.remove();
            self.handle_arrival(req);
        }
        self.release_jobs();
        self.activate_management();
        self.dispatch();
    }

    fn complete_running(&mut self) {
        let now = self.now;
        match self.running.clone() {
            Some(Entity::Job(id)) => {
                let i = self.task_index(&id).expect("running task exists");
                if let Some(job) = self.tasks[i].jobs.pop_front_if(|j| j.remaining == 0) {
                    let response = now - job.release;
                    self.emit(EventKind::JobComplete, id.as_str(), || {
                        vec![("job", job.index.to_string()), ("response", response.to_string())]
                    });
                    let stats = self.stats(&id);
                    stats.completed += 1;
                    stats.worst_response = stats.worst_response.max(Some(response));
                    self.running = None;
                }
            }
            Some(Entity::Op) => {
                let op = self.op.as_mut().expect("running operation exists");
                if op.remaining == 0 {
                    op.phase = Phase::AwaitingCommit;
                    let (rid, record) = (op.request.id.clone(), op.record);
                    self.summary.requests[record].exec_end = Some(now);
                    self.summary.requests[record].status = RequestStatus::AwaitingCommit;
                    self.emit(EventKind::OpExecEnd, MGMT_SUBJECT, || vec![("request", rid.to_string())]);
                    self.running = None;
                }
            }
            None => {}
        }
    }

    fn try_commit(&mut self) {
        let Some(op) = &self.op else { return };
        if op.phase != Phase::AwaitingCommit {
            return;
        }
        let quiescent = op
            .targets
            .iter()
            .filter_map(|id| self.task_index(id))
            .all(|i| !self.tasks[i].in_flight());
        if !quiescent {
            return;
        }
        let op = self.op.take().expect("checked above");
        let now = self.now;
        let old_live = self.live.clone();
        match apply_operation(&self.live, &op.request.payload) {
            Ok(next) => self.live = next,
            Err(e) => {
                // Unreachable as long as admission validated the request
                // against the projected state and commits stay in order.
                self.warnings.push(format!("commit of {} failed: {e}", op.request.id));
            }
        }
        self.rebuild_tasks(&old_live);
        let record = &mut self.summary.requests[op.record];
        record.commit = Some(now);
        record.status = RequestStatus::Committed;
        let latency = now - record.enqueue;
        self.summary.commits += 1;
        let targets = join_ids(&op.targets);
        let kind = op.request.kind.to_string();
        self.emit(EventKind::OpCommit, op.request.id.as_str(), || {
            vec![("kind", kind), ("targets", targets), ("latency", latency.to_string())]
        });
    }

    /// Reconciles runtime task records with the committed task set.
    fn rebuild_tasks(&mut self, old: &SystemState) {
        let now = self.now;
        let mut old_tasks: BTreeMap<ComponentId, TaskRuntime> =
            self.tasks.drain(..).map(|t| (t.component.id.clone(), t)).collect();
        let mut tasks = Vec::with_capacity(self.live.task_set.len());
        for c in &self.live.task_set.components {
            match old_tasks.remove(&c.id) {
                Some(mut rt) => {
                    let old_period = old.task_set.get(&c.id).map_or(c.period, |o| o.period);
                    if old_period != c.period && rt.released > 0 {
                        // Keep at least the larger of both periods between the
                        // last release under the old parameters and the first
                        // under the new ones.
                        let last = rt.next_release - old_period;
                        rt.next_release = last + old_period.max(c.period);
                    }
                    rt.component = c.clone();
                    tasks.push(rt);
                }
                None => {
                    self.summary.components.entry(c.id.clone()).or_default();
                    tasks.push(TaskRuntime::new(c.clone(), now));
                }
            }
        }
        for (id, rt) in old_tasks {
            let dropped = rt.jobs.len() as u64;
            self.stats(&id).dropped += dropped;
            if self.running == Some(Entity::Job(id)) {
                self.running = None;
            }
        }
        self.tasks = tasks;
    }

    fn check_deadlines(&mut self) {
        let now = self.now;
        let mut missed = Vec::new();
        for t in &mut self.tasks {
            for job in t.jobs.iter_mut().filter(|j| !j.missed && j.deadline <= now) {
                job.missed = true;
                missed.push((t.component.id.clone(), job.index, job.release));
            }
        }
        for (id, index, release) in missed {
            self.summary.deadline_misses += 1;
            self.stats(&id).missed += 1;
            self.emit(EventKind::DeadlineMiss, id.as_str(), || {
                vec![("job", index.to_string()), ("release", release.to_string())]
            });
        }
    }

    fn held(&self, id: &ComponentId) -> bool {
        self.op
            .as_ref()
            .is_some_and(|op| op.phase == Phase::AwaitingCommit && op.targets.contains(id))
    }

    fn release_jobs(&mut self) {
        let now = self.now;
        for i in 0..self.tasks.len() {
            if self.tasks[i].next_release > now || self.held(&self.tasks[i].component.id) {
                continue;
            }
            let t = &mut self.tasks[i];
            let job = Job {
                index: t.released,
                release: now,
                deadline: now + t.component.deadline,
                remaining: t.component.wcet,
                started: false,
                missed: false,
            };
            t.released += 1;
            t.next_release = now + t.component.period;
            let id = t.component.id.clone();
            let (index, deadline) = (job.index, job.deadline);
            t.jobs.push_back(job);
            self.stats(&id).released += 1;
            self.emit(EventKind::JobRelease, id.as_str(), || {
                vec![("job", index.to_string()), ("deadline", deadline.to_string())]
            });
        }
    }

    fn activate_management(&mut self) {
        if self.next_activation != Some(self.now) {
            return;
        }
        self.next_activation = Some(self.now + self.live.mgmt.period);
        self.summary.activations += 1;
        self.emit(EventKind::MgmtActivate, MGMT_SUBJECT, Vec::new);

        if let Some(op) = &self.op {
            // One operation at a time: a previous one is still executing or
            // waiting for its targets to reach a safe point.
            let rid = op.request.id.to_string();
            let queued = self.queue.len();
            self.emit(EventKind::MgmtIdle, MGMT_SUBJECT, || {
                vec![("pending", rid), ("queued", queued.to_string())]
            });
            return;
        }
        let Some((request, record)) = self.queue.pop_front() else {
            self.emit(EventKind::MgmtIdle, MGMT_SUBJECT, Vec::new);
            return;
        };
        let cost = self.live.registry.cost_of(&request.kind).unwrap_or(self.live.mgmt.cost);
        let targets = request.payload.targets();
        let max_target_period =
            targets.iter().filter_map(|id| self.live.task_set.get(id)).map(|c| c.period).max();
        let rec = &mut self.summary.requests[record];
        rec.status = RequestStatus::Executing;
        rec.cost = Some(cost);
        rec.max_target_period = max_target_period;
        self.summary.ops_executed += 1;
        self.op = Some(OpRun {
            request,
            record,
            remaining: cost,
            started: false,
            phase: Phase::Executing,
            targets,
        });
    }

    fn choose(&self) -> Option<Entity> {
        let op_ready = self.op.as_ref().is_some_and(|op| op.phase == Phase::Executing);
        let job = || {
            self.tasks
                .iter()
                .find(|t| {
                    t.jobs
                        .front()
                        .is_some_and(|j| j.started || !self.held(&t.component.id))
                })
                .map(|t| Entity::Job(t.component.id.clone()))
        };
        match self.mode {
            PriorityMode::Highest if op_ready => Some(Entity::Op),
            PriorityMode::Highest => job(),
            PriorityMode::Lowest => job().or(op_ready.then_some(Entity::Op)),
        }
    }

    fn dispatch(&mut self) {
        let chosen = self.choose();
        if chosen == self.running {
            return;
        }
        match self.running.take() {
            Some(Entity::Job(id)) => {
                let index = self.tasks[self.task_index(&id).expect("task")].jobs[0].index;
                let by = entity_name(&chosen);
                self.emit(EventKind::JobPreempt, id.as_str(), || {
                    vec![("job", index.to_string()), ("by", by)]
                });
            }
            Some(Entity::Op) => {
                let rid = self.op.as_ref().expect("op").request.id.to_string();
                let by = entity_name(&chosen);
                self.emit(EventKind::JobPreempt, MGMT_SUBJECT, || vec![("request", rid), ("by", by)]);
            }
            None => {}
        }
        match &chosen {
            Some(Entity::Job(id)) => {
                let i = self.task_index(id).expect("task");
                let job = self.tasks[i].jobs.front_mut().expect("ready job");
                let (index, resumed) = (job.index, job.started);
                job.started = true;
                let kind = if resumed { EventKind::JobResume } else { EventKind::JobStart };
                self.emit(kind, id.as_str(), || vec![("job", index.to_string())]);
                self.check_interference(id, resumed);
            }
            Some(Entity::Op) => {
                let now = self.now;
                let op = self.op.as_mut().expect("op");
                let rid = op.request.id.to_string();
                if op.started {
                    self.emit(EventKind::JobResume, MGMT_SUBJECT, || vec![("request", rid)]);
                } else {
                    op.started = true;
                    let record = op.record;
                    let kind = op.request.kind.to_string();
                    let targets = join_ids(&op.targets);
                    let cost = op.remaining;
                    self.summary.requests[record].exec_start = Some(now);
                    self.emit(EventKind::OpExecStart, MGMT_SUBJECT, || {
                        vec![
                            ("request", rid),
                            ("kind", kind),
                            ("targets", targets),
                            ("cost", cost.to_string()),
                        ]
                    });
                }
            }
            None => {}
        }
        self.running = chosen;
    }

    /// A targeted component running while its operation is half applied,
    /// or beginning a new job before the change has committed.
    fn check_interference(&mut self, id: &ComponentId, resumed: bool) {
        let Some(op) = &self.op else { return };
        if !op.targets.contains(id) {
            return;
        }
        let interfered = match op.phase {
            Phase::Executing => op.started,
            Phase::AwaitingCommit => !resumed,
        };
        if interfered {
            self.summary.interference += 1;
            let rid = op.request.id.to_string();
            self.emit(EventKind::InterferenceDetected, id.as_str(), || vec![("request", rid)]);
        }
    }

    fn handle_arrival(&mut self, req: Request) -> EnqueueOutcome {
        let record = self.summary.requests.len();
        self.summary.requests.push(RequestRecord {
            id: req.id.clone(),
            kind: req.kind.clone(),
            enqueue: req.enqueue_time,
            status: RequestStatus::Rejected,
            cost: None,
            exec_start: None,
            exec_end: None,
            commit: None,
            max_target_period: None,
        });

        let verdict = if self.record_index.contains_key(&req.id) {
            Err("duplicate_id".to_owned())
        } else {
            match evaluate_request(&self.projected, &req) {
                Err(AdmissionError::UnknownKind(_)) => Err("unregistered_kind".to_owned()),
                Err(e) => Err(e.to_string()),
                Ok((d, Some(post))) if d.accepted => Ok(post),
                Ok((d, _)) => Err(d.reason.to_string()),
            }
        };
        self.record_index.entry(req.id.clone()).or_insert(record);

        let rid = req.id.to_string();
        match verdict {
            Err(reason) => {
                self.summary.rejections += 1;
                let r = reason.clone();
                self.emit(EventKind::RequestRejected, &rid, || vec![("reason", r)]);
                EnqueueOutcome::Rejected { reason }
            }
            Ok(_) if self.queue.len() >= self.capacity => {
                self.summary.overflows += 1;
                self.summary.requests[record].status = RequestStatus::Overflowed;
                let cap = self.capacity.to_string();
                self.emit(EventKind::QueueOverflow, &rid, || vec![("capacity", cap)]);
                EnqueueOutcome::Overflow
            }
            Ok(post) => {
                self.projected = post;
                let position = self.queue.len();
                self.summary.requests[record].status = RequestStatus::Queued;
                let kind = req.kind.to_string();
                self.queue.push_back((req, record));
                self.emit(EventKind::RequestEnqueued, &rid, || {
                    vec![("kind", kind), ("position", position.to_string())]
                });
                EnqueueOutcome::Enqueued { position }
            }
        }
    }

    fn next_event_time(&self) -> Tick {
        let now = self.now;
        let mut next = Tick::MAX;
        match &self.running {
            Some(Entity::Job(id)) => {
                if let Some(i) = self.task_index(id) {
                    next = next.min(now + self.tasks[i].jobs[0].remaining);
                }
            }
            Some(Entity::Op) => {
                if let Some(op) = &self.op {
                    next = next.min(now + op.remaining);
                }
            }
            None => {}
        }
        for t in &self.tasks {
            if t.next_release > now {
                next = next.min(t.next_release);
            }
            for j in t.jobs.iter().filter(|j| !j.missed && j.deadline > now) {
                next = next.min(j.deadline);
            }
        }
        if let Some(a) = self.next_activation.filter(|&a| a > now) {
            next = next.min(a);
        }
        if let Some((&(at, _), _)) = self.arrivals.first_key_value() {
            if at > now {
                next = next.min(at);
            }
        }
        next
    }
}

fn entity_name(e: &Option<Entity>) -> String {
    match e {
        Some(Entity::Job(id)) => id.to_string(),
        Some(Entity::Op) => MGMT_SUBJECT.to_owned(),
        None => "-".to_owned(),
    }
}

fn join_ids(ids: &BTreeSet<ComponentId>) -> String {
    if ids.is_empty() {
        return "-".to_owned();
    }
    ids.iter().map(ComponentId::as_str).collect::<Vec<_>>().join("+")
}

/// Seeded sporadic arrivals in `[0, horizon)`. The first arrival falls in
/// `[0, mit)`; consecutive arrivals are `mit` to `2 * mit` ticks apart.
/// Each request's kind is drawn by weight and its payload built by
/// `payload`.
pub fn generate_sporadic_requests<F>(
    seed: u64,
    mit: Tick,
    horizon: Tick,
    kinds: &[(OpKind, u32)],
    mut payload: F,
) -> Result<Vec<Request>, SimError>
where
    F: FnMut(&OpKind, &mut ChaCha8Rng) -> Operation,
{
    if mit == 0 {
        return Err(SimError::ZeroMit);
    }
    let weights =
        WeightedIndex::new(kinds.iter().map(|(_, w)| *w)).map_err(|_| SimError::EmptyKinds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut t = rng.gen_range(0..mit);
    while t < horizon {
        let kind = &kinds[weights.sample(&mut rng)].0;
        let op = payload(kind, &mut rng);
        out.push(Request::new(format!("s{}", out.len()), kind.clone(), op, t));
        t = match t.checked_add(mit + rng.gen_range(0..=mit)) {
            Some(next) => next,
            None => break,
        };
    }
    Ok(out)
}

/// Payload factory that replaces a uniformly chosen component with a fresh
/// instance carrying identical parameters and ports.
pub fn identity_replacements(
    components: &[Component],
) -> Result<impl FnMut(&OpKind, &mut ChaCha8Rng) -> Operation + '_, SimError> {
    if components.is_empty() {
        return Err(SimError::NothingToReplace);
    }
    Ok(move |_: &OpKind, rng: &mut ChaCha8Rng| {
        let c = &components[rng.gen_range(0..components.len())];
        Operation::Replace { replacement: Component { priority: 0, ..c.clone() } }
    })
}
