//! Component and management-infrastructure domain types, together with the
//! pure state transforms behind the five structural operations (add, remove,
//! modify parameters, rebind, replace).
//!
//! Every `apply_*` function borrows its input and returns a fresh
//! [`SystemState`]; on error nothing is produced, so a failed operation is
//! observably a no-op.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::assign_rms_priorities;

/// Abstract time unit. The physical unit (e.g. milliseconds) is scenario
/// metadata; all arithmetic on ticks is exact.
pub type Tick = u64;

/// Unique component name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentId(String);

impl ComponentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ComponentId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for ComponentId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Unique request name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(String);

impl RequestId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RequestId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for RequestId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Identifiers end up as fields of tab-separated trace lines and
/// `key=value` detail lists, so they must not contain separators.
pub(crate) fn is_valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && !s
            .chars()
            .any(|c| c.is_whitespace() || c.is_control() || matches!(c, ',' | '=' | '.' | '+'))
}

/// A periodic component: one real-time thread activated every `period`
/// ticks, needing at most `wcet` ticks of processor per activation and
/// finishing within `deadline` ticks of its release.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub id: ComponentId,
    pub wcet: Tick,
    pub period: Tick,
    pub deadline: Tick,
    /// Rate-monotonic rank, 0 = highest. Derived, never serialized.
    #[serde(skip)]
    pub priority: u32,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub provided_ports: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub required_ports: BTreeSet<String>,
}

impl Component {
    pub fn new(id: impl Into<ComponentId>, wcet: Tick, period: Tick, deadline: Tick) -> Self {
        Self {
            id: id.into(),
            wcet,
            period,
            deadline,
            priority: 0,
            provided_ports: BTreeSet::new(),
            required_ports: BTreeSet::new(),
        }
    }

    pub fn provides(mut self, port: &str) -> Self {
        self.provided_ports.insert(port.to_owned());
        self
    }

    pub fn requires(mut self, port: &str) -> Self {
        self.required_ports.insert(port.to_owned());
        self
    }

    /// Violations of the temporal invariants
    /// `1 <= wcet <= deadline <= period`, plus identifier hygiene.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let id = &self.id;
        if !is_valid_identifier(id.as_str()) {
            out.push(Violation::InvalidId { id: id.as_str().to_owned() });
        }
        for port in self.provided_ports.iter().chain(&self.required_ports) {
            if !is_valid_identifier(port) {
                out.push(Violation::InvalidPort { id: id.clone(), port: port.clone() });
            }
        }
        if self.wcet == 0 {
            out.push(Violation::ZeroWcet { id: id.clone() });
        }
        if self.period < self.wcet {
            out.push(Violation::PeriodBelowWcet {
                id: id.clone(),
                period: self.period,
                wcet: self.wcet,
            });
        }
        if self.deadline > self.period {
            out.push(Violation::DeadlineAbovePeriod {
                id: id.clone(),
                deadline: self.deadline,
                period: self.period,
            });
        }
        if self.deadline < self.wcet {
            out.push(Violation::DeadlineBelowWcet {
                id: id.clone(),
                deadline: self.deadline,
                wcet: self.wcet,
            });
        }
        out
    }

    pub(crate) fn same_timing(&self, other: &Component) -> bool {
        self.wcet == other.wcet && self.period == other.period && self.deadline == other.deadline
    }
}

/// One end of a binding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortRef {
    pub component: ComponentId,
    pub port: String,
}

impl PortRef {
    pub fn new(component: impl Into<ComponentId>, port: &str) -> Self {
        Self { component: component.into(), port: port.to_owned() }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.port)
    }
}

/// Connection from a required port to a provided port.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Binding {
    pub from: PortRef,
    pub to: PortRef,
}

impl Binding {
    /// `Binding::new(("A", "req"), ("B", "svc"))` binds `A.req` to `B.svc`.
    pub fn new(from: (&str, &str), to: (&str, &str)) -> Self {
        Self { from: PortRef::new(from.0, from.1), to: PortRef::new(to.0, to.1) }
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// The running component graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaskSet {
    /// Kept in rank order once priorities have been assigned.
    pub components: Vec<Component>,
    pub bindings: Vec<Binding>,
}

impl TaskSet {
    /// Builds a task set and assigns rate-monotonic priorities.
    pub fn new(components: Vec<Component>, bindings: Vec<Binding>) -> Self {
        assign_rms_priorities(&TaskSet { components, bindings })
    }

    pub fn get(&self, id: &ComponentId) -> Option<&Component> {
        self.components.iter().find(|c| &c.id == id)
    }

    pub fn contains(&self, id: &ComponentId) -> bool {
        self.get(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// A single broken invariant found by [`validate_taskset`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("invalid identifier {id:?}")]
    InvalidId { id: String },
    #[error("invalid port name {port:?} on {id}")]
    InvalidPort { id: ComponentId, port: String },
    #[error("wcet is zero for {id}")]
    ZeroWcet { id: ComponentId },
    #[error("period < wcet for {id} ({period} < {wcet})")]
    PeriodBelowWcet { id: ComponentId, period: Tick, wcet: Tick },
    #[error("deadline > period for {id} ({deadline} > {period})")]
    DeadlineAbovePeriod { id: ComponentId, deadline: Tick, period: Tick },
    #[error("deadline < wcet for {id} ({deadline} < {wcet})")]
    DeadlineBelowWcet { id: ComponentId, deadline: Tick, wcet: Tick },
    #[error("duplicate component id {id}")]
    DuplicateId { id: ComponentId },
    #[error("dangling binding {binding}: {reason}")]
    DanglingBinding { binding: Binding, reason: String },
    #[error("required port {port} has more than one binding")]
    DuplicateRequiredPort { port: PortRef },
}

/// Checks every task-set invariant and reports all violations found.
/// An empty result means the set is valid.
pub fn validate_taskset(ts: &TaskSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for c in &ts.components {
        out.extend(c.violations());
        if !seen.insert(&c.id) {
            out.push(Violation::DuplicateId { id: c.id.clone() });
        }
    }
    let mut bound = BTreeSet::new();
    for b in &ts.bindings {
        if let Err(reason) = check_endpoints(&ts.components, b) {
            out.push(Violation::DanglingBinding { binding: b.clone(), reason });
        }
        if !bound.insert(&b.from) {
            out.push(Violation::DuplicateRequiredPort { port: b.from.clone() });
        }
    }
    out
}

fn check_endpoints(components: &[Component], b: &Binding) -> Result<(), String> {
    let find = |id: &ComponentId| components.iter().find(|c| &c.id == id);
    let from = find(&b.from.component)
        .ok_or_else(|| format!("no component {}", b.from.component))?;
    if !from.required_ports.contains(&b.from.port) {
        return Err(format!("{} has no required port {}", from.id, b.from.port));
    }
    let to = find(&b.to.component).ok_or_else(|| format!("no component {}", b.to.component))?;
    if !to.provided_ports.contains(&b.to.port) {
        return Err(format!("{} has no provided port {}", to.id, b.to.port));
    }
    Ok(())
}

/// Name of a management operation kind: one of the five built-in
/// structural operations or a user-named extension.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum OpKind {
    Add,
    Remove,
    ModifyParams,
    ModifyBindings,
    Replace,
    Custom(String),
}

impl OpKind {
    pub fn is_builtin(&self) -> bool {
        !matches!(self, OpKind::Custom(_))
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpKind::Add => "add",
            OpKind::Remove => "remove",
            OpKind::ModifyParams => "modify_params",
            OpKind::ModifyBindings => "modify_bindings",
            OpKind::Replace => "replace",
            OpKind::Custom(name) => name,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid operation kind name {0:?}")]
pub struct InvalidKindName(pub String);

impl FromStr for OpKind {
    type Err = InvalidKindName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "add" => OpKind::Add,
            "remove" => OpKind::Remove,
            "modify_params" => OpKind::ModifyParams,
            "modify_bindings" => OpKind::ModifyBindings,
            "replace" => OpKind::Replace,
            other if is_valid_identifier(other) => OpKind::Custom(other.to_owned()),
            other => return Err(InvalidKindName(other.to_owned())),
        })
    }
}

impl TryFrom<String> for OpKind {
    type Error = InvalidKindName;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<OpKind> for String {
    fn from(k: OpKind) -> Self {
        k.to_string()
    }
}

/// A registered management operation and its worst-case cost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManagementOpSpec {
    pub kind: OpKind,
    pub wcet: Tick,
}

impl ManagementOpSpec {
    pub fn new(kind: OpKind, wcet: Tick) -> Self {
        Self { kind, wcet }
    }
}

/// Registered management operations keyed by kind.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OpRegistry {
    specs: BTreeMap<OpKind, Tick>,
}

impl OpRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a registry, failing on the first duplicate kind or zero cost.
    pub fn from_specs(specs: impl IntoIterator<Item = ManagementOpSpec>) -> Result<Self, ModelError> {
        let mut reg = Self::new();
        for spec in specs {
            reg = reg.with(spec)?;
        }
        Ok(reg)
    }

    /// Returns a copy of the registry with `spec` added.
    pub fn with(&self, spec: ManagementOpSpec) -> Result<Self, ModelError> {
        if spec.wcet == 0 {
            return Err(ModelError::ZeroOperationCost(spec.kind));
        }
        if self.specs.contains_key(&spec.kind) {
            return Err(ModelError::DuplicateKind(spec.kind));
        }
        let mut specs = self.specs.clone();
        specs.insert(spec.kind, spec.wcet);
        Ok(Self { specs })
    }

    /// Returns a copy of the registry with `kind` removed.
    pub fn without(&self, kind: &OpKind) -> Result<Self, ModelError> {
        let mut specs = self.specs.clone();
        specs.remove(kind).ok_or_else(|| ModelError::UnknownKind(kind.clone()))?;
        Ok(Self { specs })
    }

    pub fn cost_of(&self, kind: &OpKind) -> Option<Tick> {
        self.specs.get(kind).copied()
    }

    pub fn contains(&self, kind: &OpKind) -> bool {
        self.specs.contains_key(kind)
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn specs(&self) -> impl Iterator<Item = ManagementOpSpec> + '_ {
        self.specs.iter().map(|(k, w)| ManagementOpSpec::new(k.clone(), *w))
    }
}

/// Parameters of the periodic management task. The deadline always equals
/// the cost; a zero cost means the task is inert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManagementTaskConfig {
    pub cost: Tick,
    pub period: Tick,
    pub deadline: Tick,
}

impl ManagementTaskConfig {
    pub fn new(cost: Tick, period: Tick) -> Self {
        Self { cost, period, deadline: cost }
    }

    pub fn inert(period: Tick) -> Self {
        Self::new(0, period)
    }

    pub fn is_inert(&self) -> bool {
        self.cost == 0
    }

    pub fn with_cost(self, cost: Tick) -> Self {
        Self::new(cost, self.period)
    }
}

/// Payload of a structural request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Operation {
    Add {
        component: Component,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        bindings: Vec<Binding>,
    },
    Remove {
        target: ComponentId,
    },
    ModifyParams {
        target: ComponentId,
        wcet: Tick,
        period: Tick,
        deadline: Tick,
    },
    ModifyBindings {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        remove: Vec<Binding>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        add: Vec<Binding>,
    },
    Replace {
        replacement: Component,
    },
}

impl Operation {
    /// The built-in kind whose payload shape this is.
    pub fn builtin_kind(&self) -> OpKind {
        match self {
            Operation::Add { .. } => OpKind::Add,
            Operation::Remove { .. } => OpKind::Remove,
            Operation::ModifyParams { .. } => OpKind::ModifyParams,
            Operation::ModifyBindings { .. } => OpKind::ModifyBindings,
            Operation::Replace { .. } => OpKind::Replace,
        }
    }

    /// Live components whose execution must be quiescent when this
    /// operation commits.
    pub fn targets(&self) -> BTreeSet<ComponentId> {
        match self {
            Operation::Add { component, bindings } => bindings
                .iter()
                .map(|b| &b.from.component)
                .filter(|id| *id != &component.id)
                .cloned()
                .collect(),
            Operation::Remove { target } | Operation::ModifyParams { target, .. } => {
                BTreeSet::from([target.clone()])
            }
            Operation::ModifyBindings { remove, add } => {
                remove.iter().chain(add).map(|b| b.from.component.clone()).collect()
            }
            Operation::Replace { replacement } => BTreeSet::from([replacement.id.clone()]),
        }
    }

    /// Whether the operation can change processor demand, given the task
    /// set it will be applied to.
    pub fn changes_load(&self, ts: &TaskSet) -> bool {
        match self {
            Operation::Add { .. } | Operation::ModifyParams { .. } => true,
            Operation::Remove { .. } | Operation::ModifyBindings { .. } => false,
            Operation::Replace { replacement } => ts
                .get(&replacement.id)
                .is_none_or(|old| !old.same_timing(replacement)),
        }
    }
}

/// A queued sporadic demand for one structural operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    pub kind: OpKind,
    pub payload: Operation,
    pub enqueue_time: Tick,
}

impl Request {
    pub fn new(id: impl Into<RequestId>, kind: OpKind, payload: Operation, enqueue_time: Tick) -> Self {
        Self { id: id.into(), kind, payload, enqueue_time }
    }

    /// Built-in kinds must carry their own payload shape; extension kinds
    /// may carry any payload.
    pub fn shape_matches(&self) -> bool {
        !self.kind.is_builtin() || self.kind == self.payload.builtin_kind()
    }
}

/// The running component graph plus the management infrastructure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemState {
    pub task_set: TaskSet,
    pub registry: OpRegistry,
    pub mgmt: ManagementTaskConfig,
}

impl SystemState {
    /// Builds a state whose management cost is derived from `registry`.
    pub fn new(task_set: TaskSet, registry: OpRegistry, mgmt_period: Tick) -> Self {
        let cost = crate::analysis::compute_cmanag(&registry);
        Self { task_set, registry, mgmt: ManagementTaskConfig::new(cost, mgmt_period) }
    }

    fn with_task_set(&self, task_set: TaskSet) -> Self {
        Self {
            task_set: assign_rms_priorities(&task_set),
            registry: self.registry.clone(),
            mgmt: self.mgmt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("duplicate component id {0}")]
    DuplicateId(ComponentId),
    #[error("unknown component {0}")]
    UnknownComponent(ComponentId),
    #[error("{target} is still referenced by {}", fmt_bindings(.by))]
    StillReferenced { target: ComponentId, by: Vec<Binding> },
    #[error("invalid parameters: {}", fmt_violations(.0))]
    InvalidParameters(Vec<Violation>),
    #[error("dangling binding {binding}: {reason}")]
    DanglingBinding { binding: Binding, reason: String },
    #[error("required port {0} is already bound")]
    DuplicateRequiredPort(PortRef),
    #[error("binding {0} does not exist")]
    MissingBinding(Binding),
    #[error("replacement id {replacement} does not match target {target}")]
    IdentityMismatch { target: ComponentId, replacement: ComponentId },
    #[error("replacement drops port {port} which carries binding {binding}")]
    PortDropped { port: String, binding: Binding },
    #[error("duplicate operation kind {0}")]
    DuplicateKind(OpKind),
    #[error("unknown operation kind {0}")]
    UnknownKind(OpKind),
    #[error("operation kind {0} has zero cost")]
    ZeroOperationCost(OpKind),
}

fn fmt_bindings(bs: &[Binding]) -> String {
    bs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn fmt_violations(vs: &[Violation]) -> String {
    vs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn check_component(c: &Component) -> Result<(), ModelError> {
    let v = c.violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameters(v))
    }
}

/// Validates `new` against `components` and the already present bindings.
fn check_new_bindings(
    components: &[Component],
    existing: &[Binding],
    new: &[Binding],
) -> Result<(), ModelError> {
    let mut bound: BTreeSet<&PortRef> = existing.iter().map(|b| &b.from).collect();
    for b in new {
        check_endpoints(components, b)
            .map_err(|reason| ModelError::DanglingBinding { binding: b.clone(), reason })?;
        if !bound.insert(&b.from) {
            return Err(ModelError::DuplicateRequiredPort(b.from.clone()));
        }
    }
    Ok(())
}

fn position(ts: &TaskSet, id: &ComponentId) -> Result<usize, ModelError> {
    ts.components
        .iter()
        .position(|c| &c.id == id)
        .ok_or_else(|| ModelError::UnknownComponent(id.clone()))
}

/// Adds `new` and its bindings.
pub fn apply_add(
    state: &SystemState,
    new: Component,
    new_bindings: Vec<Binding>,
) -> Result<SystemState, ModelError> {
    check_component(&new)?;
    if state.task_set.contains(&new.id) {
        return Err(ModelError::DuplicateId(new.id));
    }
    let mut ts = state.task_set.clone();
    ts.components.push(new);
    check_new_bindings(&ts.components, &ts.bindings, &new_bindings)?;
    ts.bindings.extend(new_bindings);
    Ok(state.with_task_set(ts))
}

/// Stops and disconnects `target`. Rejected while other components still
/// hold bindings into it; callers rebind first.
pub fn apply_remove(state: &SystemState, target: &ComponentId) -> Result<SystemState, ModelError> {
    let idx = position(&state.task_set, target)?;
    let referencing: Vec<Binding> = state
        .task_set
        .bindings
        .iter()
        .filter(|b| &b.to.component == target && &b.from.component != target)
        .cloned()
        .collect();
    if !referencing.is_empty() {
        return Err(ModelError::StillReferenced { target: target.clone(), by: referencing });
    }
    let mut ts = state.task_set.clone();
    ts.components.remove(idx);
    ts.bindings.retain(|b| &b.from.component != target);
    Ok(state.with_task_set(ts))
}

/// Replaces the temporal parameters of `target`.
pub fn apply_modify_params(
    state: &SystemState,
    target: &ComponentId,
    wcet: Tick,
    period: Tick,
    deadline: Tick,
) -> Result<SystemState, ModelError> {
    let idx = position(&state.task_set, target)?;
    let mut ts = state.task_set.clone();
    let c = &mut ts.components[idx];
    c.wcet = wcet;
    c.period = period;
    c.deadline = deadline;
    check_component(c)?;
    Ok(state.with_task_set(ts))
}

/// Atomically removes then adds bindings.
pub fn apply_rebind(
    state: &SystemState,
    remove: &[Binding],
    add: &[Binding],
) -> Result<SystemState, ModelError> {
    let mut ts = state.task_set.clone();
    for b in remove {
        let idx = ts
            .bindings
            .iter()
            .position(|x| x == b)
            .ok_or_else(|| ModelError::MissingBinding(b.clone()))?;
        ts.bindings.remove(idx);
    }
    check_new_bindings(&ts.components, &ts.bindings, add)?;
    ts.bindings.extend_from_slice(add);
    Ok(state.with_task_set(ts))
}

/// Swaps `target` for a new instance carrying the same id. Fails if the
/// new instance lacks a port that currently carries a binding.
pub fn apply_replace(
    state: &SystemState,
    target: &ComponentId,
    replacement: Component,
) -> Result<SystemState, ModelError> {
    let idx = position(&state.task_set, target)?;
    if &replacement.id != target {
        return Err(ModelError::IdentityMismatch {
            target: target.clone(),
            replacement: replacement.id,
        });
    }
    check_component(&replacement)?;
    for b in &state.task_set.bindings {
        if &b.from.component == target && !replacement.required_ports.contains(&b.from.port) {
            return Err(ModelError::PortDropped { port: b.from.port.clone(), binding: b.clone() });
        }
        if &b.to.component == target && !replacement.provided_ports.contains(&b.to.port) {
            return Err(ModelError::PortDropped { port: b.to.port.clone(), binding: b.clone() });
        }
    }
    let mut ts = state.task_set.clone();
    ts.components[idx] = replacement;
    Ok(state.with_task_set(ts))
}

/// Dispatches a request payload to the matching `apply_*` transform.
pub fn apply_operation(state: &SystemState, op: &Operation) -> Result<SystemState, ModelError> {
    match op {
        Operation::Add { component, bindings } => apply_add(state, component.clone(), bindings.clone()),
        Operation::Remove { target } => apply_remove(state, target),
        Operation::ModifyParams { target, wcet, period, deadline } => {
            apply_modify_params(state, target, *wcet, *period, *deadline)
        }
        Operation::ModifyBindings { remove, add } => apply_rebind(state, remove, add),
        Operation::Replace { replacement } => {
            apply_replace(state, &replacement.id, replacement.clone())
        }
    }
}
