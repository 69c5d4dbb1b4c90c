//! Core engine for a hybrid human/AI task workflow.
//!
//! A client task moves through an event-sourced lifecycle ([`task`], [`audit`]).
//! The [`orchestrator`] decomposes it into gated steps and decides, one action at a
//! time, whether to execute, ask an expert for a gate decision, run checks or
//! escalate. The [`qa`] layer holds the online and offline detectors, and
//! [`workers`] describes who does the work: scripted or synthetic AI workers,
//! console-mediated human experts and the marketplace baseline.

pub mod audit;
pub mod deliverable;
pub mod grade;
pub mod orchestrator;
pub mod qa;
pub mod task;
pub mod taxonomy;
pub mod workers;

pub use audit::{AuditEvent, AuditLog, EventFile, LogError, Payload};
pub use grade::{Grade, Quality};
pub use deliverable::{
    AttachmentRef, Citation, Deliverable, MediaKind, NamedTable, SourceText, TabularData,
};
pub use task::{
    apply_event, legal_events, replay, Actor, AssignedWorker, EventKind, Phase, ReplayError,
    StepPhase, StepProgress, TaskBrief, TaskState, TransitionError, WorkerRole,
};
pub use taxonomy::Area;
pub use workers::WorkerKind;

/// Hex-encoded SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
