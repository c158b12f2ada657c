use serde::{Deserialize, Serialize};

use super::{ErrorCode, ServiceError};
use crate::cost::{CostMatrix, FeatureVector};
use crate::data::{DecodedFeature, Encoding, FeatureValue};
use crate::elicit::Answer;
use crate::grad::RecoursePlan;
use crate::graph::SequentialPlan;
use crate::DEFAULT_MARGIN;

/// Who the session is about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectRef {
    /// Position in the dataset's test split.
    TestRow(usize),
    /// One value per column, in original units.
    Features(Vec<FeatureValue>),
}

fn default_budget() -> usize {
    5
}

fn default_strategy() -> String {
    "similar2".into()
}

fn default_k() -> usize {
    2
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub dataset: String,
    pub subject: SubjectRef,
    /// Question budget `T`.
    #[serde(default = "default_budget", alias = "T")]
    pub budget: usize,
    /// `exhaustive`, `similar2`, `similarK`, `similar<k>` or `random`.
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_margin", alias = "epsilon")]
    pub margin: f64,
    /// Inconsistency tolerance `α`; unset fails the session on a contradiction.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRequest {
    /// Idempotency token; resubmitting it replays the first response.
    pub token: String,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseRequest {
    /// `grad`, `graph` or `graph-worst-case`.
    pub method: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecourseMethod {
    Grad,
    Graph,
    GraphWorstCase,
}

impl std::str::FromStr for RecourseMethod {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grad" => Ok(RecourseMethod::Grad),
            "graph" => Ok(RecourseMethod::Graph),
            "graph-worst-case" => Ok(RecourseMethod::GraphWorstCase),
            other => Err(ServiceError::invalid(format!("unknown recourse method `{other}`"))
                .with_detail(serde_json::json!({ "allowed": ["grad", "graph", "graph-worst-case"] }))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingAnswer,
    /// Budget spent; recourse may be requested.
    Ready,
    /// At least one plan was delivered.
    Completed,
    Failed,
}

impl SessionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::AwaitingAnswer => "awaiting_answer",
            SessionStatus::Ready => "ready",
            SessionStatus::Completed => "completed",
            SessionStatus::Failed => "failed",
        }
    }
}

/// Change of one feature between two points, in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDelta {
    pub name: String,
    pub from: FeatureValue,
    pub to: FeatureValue,
    /// `to − from` for continuous features.
    pub delta: Option<f64>,
}

pub(crate) fn deltas(encoding: &Encoding, from: &FeatureVector, to: &FeatureVector) -> Vec<FeatureDelta> {
    encoding
        .decode(from)
        .into_iter()
        .zip(encoding.decode(to))
        .map(|(a, b)| FeatureDelta {
            delta: match (&a.value, &b.value) {
                (FeatureValue::Number(x), FeatureValue::Number(y)) => Some(y - x),
                _ => None,
            },
            name: a.name,
            from: a.value,
            to: b.value,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionView {
    /// Pool index; the value to send back in `{"preferred": index}`.
    pub index: usize,
    pub features: Vec<DecodedFeature>,
    /// Relative to the subject.
    pub changes: Vec<FeatureDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    /// 1-based round this question belongs to.
    pub round: usize,
    pub options: Vec<OptionView>,
    pub allow_indifferent: bool,
}

/// Snapshot of one session as returned by every session endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub dataset: String,
    pub status: SessionStatus,
    /// Answers applied so far.
    pub round: usize,
    pub budget: usize,
    pub subject: Vec<DecodedFeature>,
    pub question: Option<QuestionView>,
    pub center: CostMatrix,
    pub radius: f64,
    /// Cuts the tolerant center gave up on.
    pub violated: Vec<usize>,
    pub failure: Option<ServiceError>,
    /// Unix milliseconds.
    pub created_at: u64,
    pub updated_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub features: Vec<DecodedFeature>,
    /// Relative to the previous step.
    pub changes: Vec<FeatureDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Plan {
    Gradient(RecoursePlan),
    Path(SequentialPlan),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseResponse {
    pub method: RecourseMethod,
    pub valid: bool,
    /// Encoded plan as produced by the generator.
    pub plan: Plan,
    /// From the subject to the terminal point, in original units.
    pub steps: Vec<PlanStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub name: String,
    pub columns: Vec<String>,
    pub encoded_dim: usize,
    pub test_rows: usize,
    /// Test-row positions the classifier rejects, i.e. valid subjects.
    pub negative_test_rows: Vec<usize>,
    pub pool_size: usize,
}

impl ServiceError {
    pub(crate) fn status_conflict(status: SessionStatus, wanted: &str) -> Self {
        ServiceError::new(ErrorCode::Conflict, format!("session is {}, operation needs {wanted}", status.as_str()))
            .with_detail(serde_json::json!({ "status": status }))
    }
}
