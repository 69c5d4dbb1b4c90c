//! Planning, routing, gating and the control loop.

mod control;
pub mod driver;
mod gate;
mod plan;
mod routing;

pub use control::{
    budget_exhausted, conflicting_sources, escalation_trigger, failed_twice, low_self_consistency, next_action,
    online_disposition, reopen_targets, Action, LoopConfig, LoopError, OnlineDisposition,
};
pub use gate::{handle_gate_decision, Decision, GateDecision, GateError};
pub use plan::{
    decompose, Plan, PlanError, PlanStep, Risk, StepStatus, StepTemplate, Template, TemplateLibrary, GENERIC_CATEGORY,
};
pub use routing::{
    escalate, match_worker, Assignment, EscalationKind, EscalationReason, Match, RoutingError, RoutingRequest,
};
