//! Live elicitation sessions behind a transport-neutral API.
//!
//! [`SessionStore`] owns the sessions. Each one is guarded by its own lock,
//! so distinct sessions proceed in parallel and operations on one session
//! are serialized. With a log directory every session appends its events to
//! `<dir>/<session_id>.jsonl`; [`SessionStore::open`] replays those logs and
//! re-derives every center from the answers.
//!
//! The HTTP layer maps [`ServiceError::code`] onto status codes and
//! serializes the error as `{code, message, detail}`.

mod api;
mod store;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use api::{
    AnswerRequest, CreateSessionRequest, DatasetInfo, FeatureDelta, OptionView, Plan, PlanStep, QuestionView, RecourseMethod,
    RecourseRequest, RecourseResponse, SessionRecord, SessionStatus, SubjectRef,
};
pub use store::{DatasetEntry, Event, SessionStore};

use crate::data::DataError;
use crate::elicit::ElicitError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    InvalidArgument,
    NotFound,
    UnknownDataset,
    SubjectAlreadyPositive,
    /// The session is not in the state the operation needs.
    Conflict,
    /// The idempotency token was used for a different answer.
    TokenMismatch,
    Infeasible,
    Unreachable,
    InvalidPlan,
    Internal,
}

impl ErrorCode {
    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::InvalidArgument => 400,
            ErrorCode::NotFound | ErrorCode::UnknownDataset => 404,
            ErrorCode::Conflict | ErrorCode::TokenMismatch => 409,
            ErrorCode::SubjectAlreadyPositive
            | ErrorCode::Infeasible
            | ErrorCode::Unreachable
            | ErrorCode::InvalidPlan => 422,
            ErrorCode::Internal => 500,
        }
    }
}

/// Wire form of every failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{message}")]
pub struct ServiceError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default)]
    pub detail: Value,
}

impl ServiceError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::InvalidArgument, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Internal, message)
    }
}

impl From<ElicitError> for ServiceError {
    fn from(e: ElicitError) -> Self {
        use crate::conic::ConicError;
        let code = match &e {
            ElicitError::InvalidArgument(_) | ElicitError::InvalidAnswer(_) | ElicitError::Cost(_) => {
                ErrorCode::InvalidArgument
            }
            ElicitError::NoPendingQuestion | ElicitError::BudgetExhausted => ErrorCode::Conflict,
            ElicitError::Conic(ConicError::Infeasible { .. } | ConicError::InfeasibleWithBudget { .. }) => {
                ErrorCode::Infeasible
            }
            _ => ErrorCode::Internal,
        };
        ServiceError::new(code, e.to_string())
    }
}

impl From<DataError> for ServiceError {
    fn from(e: DataError) -> Self {
        ServiceError::invalid(e.to_string())
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::internal(format!("event log: {e}"))
    }
}
