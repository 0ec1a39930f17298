//! On-line acceptance tests.
//!
//! Registering a management operation may raise the reserved management
//! cost; the new cost is accepted only if the whole task set stays
//! schedulable with it. An operation no more expensive than the current
//! reservation is accepted without analysis. Individual structural requests
//! are checked against the task set they would produce.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{compute_cmanag, response_time_with_mgmt, ResponseTimeReport};
use crate::model::{
    apply_operation, ManagementOpSpec, ManagementTaskConfig, ModelError, OpKind, Request,
    SystemState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionReason {
    /// Accepted without running the response-time analysis.
    FastPath,
    RtaPass,
    RtaFail,
    InvalidPayload,
    /// The request is structurally valid but its post-state is not
    /// schedulable.
    StructuralFail,
}

impl fmt::Display for AdmissionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdmissionReason::FastPath => "fast_path",
            AdmissionReason::RtaPass => "rta_pass",
            AdmissionReason::RtaFail => "rta_fail",
            AdmissionReason::InvalidPayload => "invalid_payload",
            AdmissionReason::StructuralFail => "structural_fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissionDecision {
    pub accepted: bool,
    pub reason: AdmissionReason,
    pub before: ManagementTaskConfig,
    pub after: ManagementTaskConfig,
    pub report: Option<ResponseTimeReport>,
    /// Why the payload was invalid, for `InvalidPayload` rejections.
    pub detail: Option<String>,
}

impl AdmissionDecision {
    fn accept(reason: AdmissionReason, before: ManagementTaskConfig, after: ManagementTaskConfig) -> Self {
        Self { accepted: true, reason, before, after, report: None, detail: None }
    }

    fn reject(reason: AdmissionReason, before: ManagementTaskConfig) -> Self {
        Self { accepted: false, reason, before, after: before, report: None, detail: None }
    }

    fn with_report(mut self, report: ResponseTimeReport) -> Self {
        self.report = Some(report);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdmissionError {
    #[error("operation kind {0} is already registered")]
    DuplicateKind(OpKind),
    #[error("operation kind {0} is not registered")]
    UnknownKind(OpKind),
    #[error(transparent)]
    Model(Box<ModelError>),
}

impl From<ModelError> for AdmissionError {
    fn from(e: ModelError) -> Self {
        AdmissionError::Model(Box::new(e))
    }
}

/// Registers a new operation kind. On acceptance the registry and the
/// management cost/deadline are updated together; on rejection the returned
/// state equals the input.
pub fn register_operation(
    state: &SystemState,
    spec: ManagementOpSpec,
) -> Result<(SystemState, AdmissionDecision), AdmissionError> {
    if state.registry.contains(&spec.kind) {
        return Err(AdmissionError::DuplicateKind(spec.kind));
    }
    let before = state.mgmt;
    let registry = state.registry.with(spec.clone())?;

    if spec.wcet <= before.cost {
        let next = SystemState { registry, ..state.clone() };
        return Ok((next, AdmissionDecision::accept(AdmissionReason::FastPath, before, before)));
    }

    let candidate = before.with_cost(compute_cmanag(&registry));
    let report = response_time_with_mgmt(&state.task_set, &candidate);
    if report.schedulable {
        let next = SystemState { task_set: state.task_set.clone(), registry, mgmt: candidate };
        let decision = AdmissionDecision::accept(AdmissionReason::RtaPass, before, candidate);
        Ok((next, decision.with_report(report)))
    } else {
        let decision = AdmissionDecision::reject(AdmissionReason::RtaFail, before);
        Ok((state.clone(), decision.with_report(report)))
    }
}

/// Removes an operation kind and shrinks the management reservation to the
/// new maximum. Shrinking interference never hurts schedulability, so no
/// test is run.
pub fn unregister_operation(state: &SystemState, kind: &OpKind) -> Result<SystemState, AdmissionError> {
    if !state.registry.contains(kind) {
        return Err(AdmissionError::UnknownKind(kind.clone()));
    }
    let registry = state.registry.without(kind)?;
    let mgmt = state.mgmt.with_cost(compute_cmanag(&registry));
    Ok(SystemState { task_set: state.task_set.clone(), registry, mgmt })
}

/// Decides whether `req` may be queued against `state`.
pub fn admit_request(state: &SystemState, req: &Request) -> Result<AdmissionDecision, AdmissionError> {
    evaluate_request(state, req).map(|(decision, _)| decision)
}

/// Like [`admit_request`], also returning the post-operation state when the
/// request is accepted.
pub fn evaluate_request(
    state: &SystemState,
    req: &Request,
) -> Result<(AdmissionDecision, Option<SystemState>), AdmissionError> {
    if !state.registry.contains(&req.kind) {
        return Err(AdmissionError::UnknownKind(req.kind.clone()));
    }
    let mgmt = state.mgmt;
    let invalid = |detail: String| {
        let mut d = AdmissionDecision::reject(AdmissionReason::InvalidPayload, mgmt);
        d.detail = Some(detail);
        Ok((d, None))
    };
    if !req.shape_matches() {
        return invalid(format!(
            "payload {} does not match kind {}",
            req.payload.builtin_kind(),
            req.kind
        ));
    }
    let post = match apply_operation(state, &req.payload) {
        Ok(post) => post,
        Err(e) => return invalid(e.to_string()),
    };
    if !req.payload.changes_load(&state.task_set) {
        let decision = AdmissionDecision::accept(AdmissionReason::FastPath, mgmt, mgmt);
        return Ok((decision, Some(post)));
    }
    let report = response_time_with_mgmt(&post.task_set, &post.mgmt);
    if report.schedulable {
        let decision = AdmissionDecision::accept(AdmissionReason::RtaPass, mgmt, mgmt);
        Ok((decision.with_report(report), Some(post)))
    } else {
        let decision = AdmissionDecision::reject(AdmissionReason::StructuralFail, mgmt);
        Ok((decision.with_report(report), None))
    }
}
