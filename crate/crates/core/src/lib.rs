//! Schedulability analysis, admission control and deterministic simulation
//! for component-based real-time systems whose structure changes at run
//! time.
//!
//! Structural operations (add, remove, modify, rebind, replace) are queued
//! as sporadic requests and executed one per activation by a periodic
//! management task that runs at the highest priority without preemption.
//! The processor time it reserves is accounted for in an exact
//! response-time analysis, and new operation kinds are admitted only when
//! the system stays schedulable.
//!
//! - [`model`]: components, bindings, registry, requests and the pure
//!   structural transforms.
//! - [`analysis`]: rate-monotonic ranks, response-time analysis with and
//!   without management interference, management task sizing.
//! - [`admission`]: acceptance tests for operation kinds and requests.
//! - [`simulator`]: integer-tick discrete-event simulation and traces.
//! - [`batch`]: analysis/simulation cross-checks over many task sets.
//! - [`scenario`] and [`cli`]: JSON scenarios and the command-line front end.

pub mod admission;
pub mod analysis;
pub mod batch;
pub mod cli;
pub mod model;
pub mod scenario;
pub mod simulator;

pub use admission::{
    admit_request, register_operation, unregister_operation, AdmissionDecision, AdmissionReason,
};
pub use analysis::{
    assign_rms_priorities, compute_cmanag, hyperperiod, period_from_utilization,
    period_from_window, response_time, response_time_with_mgmt, snap_period_to_existing, Percent,
    ResponseTime, ResponseTimeReport,
};
pub use model::{
    Binding, Component, ComponentId, ManagementOpSpec, ManagementTaskConfig, OpKind, OpRegistry,
    Operation, Request, RequestId, SystemState, TaskSet, Tick,
};
pub use simulator::{new_simulation, EventKind, PriorityMode, SimConfig, SimSummary, Simulation, TraceEvent};
