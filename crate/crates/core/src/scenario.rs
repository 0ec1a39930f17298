//! JSON scenario documents.
//!
//! A scenario describes the initial component graph, the registered
//! management operations, how the management task is sized and an optional
//! simulation block. The schema is documented in `docs/scenario-format.md` at the
//! repository root.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    compute_cmanag, period_from_utilization, period_from_window, snap_period_to_existing, Percent,
};
use crate::model::{
    validate_taskset, Binding, Component, ManagementOpSpec, ManagementTaskConfig, OpKind,
    OpRegistry, Operation, Request, RequestId, SystemState, TaskSet, Tick,
};
use crate::simulator::{PriorityMode, SimConfig, SporadicSource};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub metadata: Metadata,
    pub components: Vec<Component>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bindings: Vec<Binding>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub operations: Vec<ManagementOpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub management: Option<ManagementSizing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationBlock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub name: String,
    #[serde(default = "default_tick_unit")]
    pub tick_unit: String,
}

fn default_tick_unit() -> String {
    "tick".to_owned()
}

/// Exactly one of `period`, `utilization_percent` or `window` + `count`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManagementSizing {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<Tick>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilization_percent: Option<Percent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Tick>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snap_tolerance_percent: Option<Percent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub horizon: Tick,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_capacity")]
    pub queue_capacity: usize,
    #[serde(default)]
    pub priority_mode: PriorityMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requests: Vec<ScriptedRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sporadic: Option<SporadicBlock>,
}

fn default_capacity() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedRequest {
    pub id: RequestId,
    pub time: Tick,
    pub kind: OpKind,
    pub payload: Operation,
}

/// Identity-preserving replacements of random components, at least `mit`
/// ticks apart. The generator seed is the simulation seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SporadicBlock {
    pub mit: Tick,
    pub kinds: Vec<WeightedKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedKind {
    pub kind: OpKind,
    #[serde(default = "default_weight")]
    pub weight: u32,
}

fn default_weight() -> u32 {
    1
}

/// A parse or validation problem. Syntax errors carry a line/column; all
/// diagnostics carry the document path they refer to when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), line: None, column: None, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, "{l}:{c}: ")?;
        }
        if !self.path.is_empty() && self.path != "." {
            write!(f, "{}: ", self.path)?;
        }
        f.write_str(&self.message)
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, Vec<Diagnostic>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        vec![Diagnostic {
            path,
            line: Some(inner.line()),
            column: Some(inner.column()),
            message: inner.to_string(),
        }]
    })?;
    let diags = scenario.validate();
    if diags.is_empty() {
        Ok(scenario)
    } else {
        Err(diags)
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = serde_json::to_string_pretty(s).expect("scenario serializes");
    out.push('\n');
    out
}

impl Scenario {
    pub fn task_set(&self) -> TaskSet {
        TaskSet::new(self.components.clone(), self.bindings.clone())
    }

    /// Every invariant violation, with its document path.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for v in validate_taskset(&self.task_set()) {
            out.push(Diagnostic::at("components", v.to_string()));
        }

        let mut kinds = BTreeSet::new();
        for (i, op) in self.operations.iter().enumerate() {
            if !kinds.insert(&op.kind) {
                out.push(Diagnostic::at(
                    format!("operations[{i}].kind"),
                    format!("duplicate operation kind {}", op.kind),
                ));
            }
            if op.wcet == 0 {
                out.push(Diagnostic::at(format!("operations[{i}].wcet"), "wcet must be at least 1"));
            }
        }

        match &self.management {
            None if !self.operations.is_empty() => out.push(Diagnostic::at(
                "management",
                "a management sizing is required when operations are registered",
            )),
            None => {}
            Some(m) => out.extend(self.validate_sizing(m)),
        }

        if let Some(sim) = &self.simulation {
            if sim.horizon == 0 {
                out.push(Diagnostic::at("simulation.horizon", "horizon must be at least 1"));
            }
            if sim.queue_capacity == 0 {
                out.push(Diagnostic::at("simulation.queue_capacity", "queue capacity must be at least 1"));
            }
            let mut ids = BTreeSet::new();
            for (i, r) in sim.requests.iter().enumerate() {
                if !ids.insert(&r.id) {
                    out.push(Diagnostic::at(
                        format!("simulation.requests[{i}].id"),
                        format!("duplicate request id {}", r.id),
                    ));
                }
                if !kinds.contains(&r.kind) {
                    out.push(Diagnostic::at(
                        format!("simulation.requests[{i}].kind"),
                        format!("operation kind {} is not registered", r.kind),
                    ));
                }
            }
            if let Some(sp) = &sim.sporadic {
                if sp.mit == 0 {
                    out.push(Diagnostic::at("simulation.sporadic.mit", "mit must be at least 1"));
                }
                if sp.kinds.iter().all(|k| k.weight == 0) {
                    out.push(Diagnostic::at("simulation.sporadic.kinds", "at least one positive weight is required"));
                }
                for (i, k) in sp.kinds.iter().enumerate() {
                    let path = format!("simulation.sporadic.kinds[{i}].kind");
                    if !kinds.contains(&k.kind) {
                        out.push(Diagnostic::at(path, format!("operation kind {} is not registered", k.kind)));
                    } else if k.kind.is_builtin() && k.kind != OpKind::Replace {
                        out.push(Diagnostic::at(
                            path,
                            format!("generated requests are replacements; kind {} cannot carry them", k.kind),
                        ));
                    }
                }
                if self.components.is_empty() {
                    out.push(Diagnostic::at("simulation.sporadic", "no component to replace"));
                }
            }
        }
        out
    }

    fn validate_sizing(&self, m: &ManagementSizing) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let modes = [m.period.is_some(), m.utilization_percent.is_some(), m.window.is_some() || m.count.is_some()];
        match modes.iter().filter(|b| **b).count() {
            0 => out.push(Diagnostic::at(
                "management",
                "one of period, utilization_percent or window+count is required",
            )),
            1 => {}
            _ => out.push(Diagnostic::at(
                "management",
                "period, utilization_percent and window+count are mutually exclusive",
            )),
        }
        if m.window.is_some() != m.count.is_some() {
            out.push(Diagnostic::at("management", "window and count must be given together"));
        }
        if out.is_empty() {
            if let Err(e) = self.management_config() {
                out.push(e);
            }
        }
        out
    }

    /// Management task derived from the registered operations and the
    /// sizing directive, after optional snapping.
    pub fn management_config(&self) -> Result<ManagementTaskConfig, Diagnostic> {
        let cost = compute_cmanag(&self.registry()?);
        let Some(m) = &self.management else {
            return Ok(ManagementTaskConfig::inert(0));
        };
        let sizing_err = |e: crate::analysis::SizingError| Diagnostic::at("management", e.to_string());
        let mut period = if let Some(p) = m.period {
            p
        } else if let Some(u) = m.utilization_percent {
            if cost == 0 {
                return Err(Diagnostic::at(
                    "management.utilization_percent",
                    "utilization sizing needs at least one registered operation",
                ));
            }
            period_from_utilization(cost, u).map_err(sizing_err)?
        } else {
            let (w, n) = m.window.zip(m.count).ok_or_else(|| {
                Diagnostic::at("management", "window and count must be given together")
            })?;
            period_from_window(w, n).map_err(sizing_err)?
        };
        if let Some(tol) = m.snap_tolerance_percent {
            period = snap_period_to_existing(period, &self.task_set(), tol);
        }
        if period == 0 {
            return Err(Diagnostic::at("management.period", "period must be at least 1"));
        }
        if period < cost {
            return Err(Diagnostic::at(
                "management.period",
                format!("period {period} is shorter than the management cost {cost}"),
            ));
        }
        Ok(ManagementTaskConfig::new(cost, period))
    }

    pub fn registry(&self) -> Result<OpRegistry, Diagnostic> {
        OpRegistry::from_specs(self.operations.iter().cloned())
            .map_err(|e| Diagnostic::at("operations", e.to_string()))
    }

    pub fn system_state(&self) -> Result<SystemState, Diagnostic> {
        Ok(SystemState {
            task_set: self.task_set(),
            registry: self.registry()?,
            mgmt: self.management_config()?,
        })
    }

    /// Simulation configuration; `seed` overrides the document's seed.
    pub fn sim_config(&self, seed: Option<u64>) -> Result<SimConfig, Diagnostic> {
        let block = self
            .simulation
            .as_ref()
            .ok_or_else(|| Diagnostic::at("simulation", "scenario has no simulation block"))?;
        let mut cfg = SimConfig::new(self.system_state()?, block.horizon);
        cfg.mgmt_priority_mode = block.priority_mode;
        cfg.queue_capacity = block.queue_capacity;
        cfg.scripted = block
            .requests
            .iter()
            .map(|r| Request::new(r.id.clone(), r.kind.clone(), r.payload.clone(), r.time))
            .collect();
        cfg.sporadic = block.sporadic.as_ref().map(|sp| SporadicSource {
            seed: seed.unwrap_or(block.seed),
            mit: sp.mit,
            kinds: sp.kinds.iter().map(|k| (k.kind.clone(), k.weight)).collect(),
        });
        Ok(cfg)
    }
}
