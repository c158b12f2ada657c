use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::api::{
    deltas, AnswerRequest, CreateSessionRequest, DatasetInfo, OptionView, Plan, PlanStep, QuestionView, RecourseMethod,
    RecourseRequest, RecourseResponse, SessionRecord, SessionStatus, SubjectRef,
};
use super::{ErrorCode, ServiceError};
use crate::bench::Prepared;
use crate::cost::{ConfidenceSetSpec, CostMatrix, FeatureVector};
use crate::data::{Classifier, Dataset};
use crate::elicit::{Answer, ElicitError, ElicitationSession, SessionConfig, Strategy, TranscriptEntry};
use crate::grad::{self, CostModel, GradConfig, GradError};
use crate::graph::{self, GraphError, RecourseGraph};

/// A dataset the service can open sessions on.
pub struct DatasetEntry {
    pub id: String,
    pub data: Dataset,
    pub classifier: Box<dyn Classifier>,
    /// Candidate recourses shown in questions.
    pub pool: Vec<FeatureVector>,
    /// Nodes of the recourse graph with their predicted class.
    pub graph_points: Vec<(FeatureVector, bool)>,
    pub graph_k: usize,
    pub grad: GradConfig,
}

impl DatasetEntry {
    pub fn from_prepared(id: impl Into<String>, prepared: Prepared) -> Self {
        let grad = GradConfig {
            one_hot_blocks: prepared.data.encoding().one_hot_blocks(),
            ..GradConfig::default()
        };
        Self {
            id: id.into(),
            data: prepared.data,
            classifier: prepared.classifier,
            pool: prepared.pool,
            graph_points: prepared.graph_points,
            graph_k: graph::DEFAULT_K,
            grad,
        }
    }

    pub fn info(&self) -> DatasetInfo {
        let tests = self.data.test_indices();
        DatasetInfo {
            id: self.id.clone(),
            name: self.data.name.clone(),
            columns: self.data.encoding().columns.iter().map(|c| c.name().to_string()).collect(),
            encoded_dim: self.data.dim(),
            test_rows: tests.len(),
            negative_test_rows: (0..tests.len())
                .filter(|&k| !self.classifier.predict(self.data.row(tests[k]).as_vector()))
                .collect(),
            pool_size: self.pool.len(),
        }
    }

    fn subject(&self, subject: &SubjectRef) -> Result<FeatureVector, ServiceError> {
        match subject {
            SubjectRef::TestRow(k) => {
                let tests = self.data.test_indices();
                let row = tests.get(*k).ok_or_else(|| {
                    ServiceError::invalid(format!("test row {k} out of range")).with_detail(serde_json::json!({
                        "test_rows": tests.len()
                    }))
                })?;
                Ok(self.data.row(*row).clone())
            }
            SubjectRef::Features(values) => Ok(self.data.encoding().encode(values)?),
        }
    }
}

/// One line of a session's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// Carries the encoded subject and pool so the log replays on its own.
    Created {
        session_id: String,
        at: u64,
        request: CreateSessionRequest,
        x0: FeatureVector,
        pool: Vec<FeatureVector>,
    },
    QuestionIssued {
        at: u64,
        round: usize,
        option_indices: Vec<usize>,
    },
    AnswerReceived {
        at: u64,
        token: String,
        answer: Answer,
    },
    Failed {
        at: u64,
        token: String,
        answer: Answer,
        error: ServiceError,
    },
    RecourseIssued {
        at: u64,
        method: RecourseMethod,
    },
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

struct Slot {
    id: String,
    dataset: Arc<DatasetEntry>,
    session: ElicitationSession,
    failure: Option<ServiceError>,
    delivered: bool,
    created_at: u64,
    updated_at: u64,
    /// First response per idempotency token.
    answered: HashMap<String, (Answer, SessionRecord)>,
    log: Option<File>,
}

impl Slot {
    fn status(&self) -> SessionStatus {
        if self.failure.is_some() {
            SessionStatus::Failed
        } else if self.delivered {
            SessionStatus::Completed
        } else if self.session.is_complete() {
            SessionStatus::Ready
        } else {
            SessionStatus::AwaitingAnswer
        }
    }

    /// Appends one event as a single write.
    fn append(&mut self, event: &Event) -> Result<(), ServiceError> {
        if let Some(file) = &mut self.log {
            let mut line = serde_json::to_vec(event).map_err(|e| ServiceError::internal(e.to_string()))?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.flush()?;
        }
        Ok(())
    }

    /// Selects the next question if one is due and logs it.
    fn advance(&mut self, at: u64) -> Result<(), ServiceError> {
        let before = self.session.pending().is_some();
        let issued = self.session.next_question()?.map(|q| q.option_indices.clone());
        if let (false, Some(option_indices)) = (before, issued) {
            let round = self.session.round() + 1;
            self.append(&Event::QuestionIssued { at, round, option_indices })?;
        }
        Ok(())
    }

    fn record(&self) -> SessionRecord {
        let encoding = self.dataset.data.encoding();
        let x0 = self.session.x0();
        let question = match self.status() {
            SessionStatus::AwaitingAnswer => self.session.pending().map(|q| QuestionView {
                round: self.session.round() + 1,
                allow_indifferent: q.option_indices.len() == 2,
                options: q
                    .option_indices
                    .iter()
                    .map(|&i| {
                        let x = &self.session.pool()[i];
                        OptionView {
                            index: i,
                            features: encoding.decode(x),
                            changes: deltas(encoding, x0, x),
                        }
                    })
                    .collect(),
            }),
            _ => None,
        };
        let incumbent = self.session.incumbent();
        SessionRecord {
            session_id: self.id.clone(),
            dataset: self.dataset.id.clone(),
            status: self.status(),
            round: self.session.round(),
            budget: self.session.budget(),
            subject: encoding.decode(x0),
            question,
            center: incumbent.center.clone(),
            radius: incumbent.radius,
            violated: self.session.violated().iter().copied().collect(),
            failure: self.failure.clone(),
            created_at: self.created_at,
            updated_at: self.updated_at,
        }
    }

    /// Applies an answer, or marks the session failed when the solver
    /// rejects it. Malformed answers leave the session untouched.
    fn answer(&mut self, token: &str, answer: Answer, at: u64) -> Result<SessionRecord, ServiceError> {
        match self.session.apply_answer(answer) {
            Ok(_) => {
                self.updated_at = at;
                self.append(&Event::AnswerReceived {
                    at,
                    token: token.to_string(),
                    answer,
                })?;
                self.advance(at)?;
            }
            Err(e @ (ElicitError::InvalidAnswer(_) | ElicitError::NoPendingQuestion)) => return Err(e.into()),
            Err(e) => {
                let error = ServiceError::from(e).with_detail(serde_json::json!({
                    "round": self.session.round() + 1,
                    "tolerance": self.session.config().tolerance,
                }));
                self.failure = Some(error.clone());
                self.updated_at = at;
                self.append(&Event::Failed {
                    at,
                    token: token.to_string(),
                    answer,
                    error,
                })?;
            }
        }
        let record = self.record();
        self.answered.insert(token.to_string(), (answer, record.clone()));
        Ok(record)
    }

    /// Confidence set without the cuts the tolerant center dropped.
    fn consistent_spec(&self) -> Result<ConfidenceSetSpec, ServiceError> {
        let spec = self.session.spec();
        let violated = self.session.violated();
        let cuts = spec
            .cuts()
            .iter()
            .enumerate()
            .filter(|(k, _)| !violated.contains(k))
            .map(|(_, c)| c.clone())
            .collect();
        ConfidenceSetSpec::new(spec.dim(), spec.margin(), cuts).map_err(|e| ServiceError::internal(e.to_string()))
    }

    fn recourse(&mut self, method: RecourseMethod) -> Result<RecourseResponse, ServiceError> {
        let status = self.status();
        if !matches!(status, SessionStatus::Ready | SessionStatus::Completed) {
            return Err(ServiceError::status_conflict(status, "ready"));
        }
        let entry = Arc::clone(&self.dataset);
        let encoding = entry.data.encoding();
        let x0 = self.session.x0().clone();
        let clf = entry.classifier.as_ref();
        let half = CostMatrix::scaled_identity(x0.dim(), 0.5);
        // No answers: the ½I convention, as in the benchmark.
        let answered = self.session.round() > 0;

        let (valid, plan, points) = match method {
            RecourseMethod::Grad => {
                let model = if answered {
                    CostModel::WorstCase(self.consistent_spec()?)
                } else {
                    CostModel::Fixed(half)
                };
                let plan = grad::generate(&x0, clf, &model, &entry.grad).map_err(grad_error)?;
                if !plan.valid {
                    return Err(ServiceError::new(ErrorCode::InvalidPlan, "no valid point over the whole λ schedule")
                        .with_detail(serde_json::to_value(&plan).unwrap_or_default()));
                }
                let points = vec![x0.clone(), plan.terminal.clone()];
                (plan.valid, Plan::Gradient(plan), points)
            }
            RecourseMethod::Graph | RecourseMethod::GraphWorstCase => {
                let mut g = RecourseGraph::build(&x0, &entry.graph_points, entry.graph_k, false).map_err(graph_error)?;
                match method {
                    RecourseMethod::GraphWorstCase if answered => g.assign_worst_case_weights(&self.consistent_spec()?),
                    RecourseMethod::Graph if answered => g.assign_weights(&self.session.incumbent().center),
                    _ => g.assign_weights(&half),
                }
                .map_err(graph_error)?;
                let plan = graph::shortest_sequential_recourse(&g).map_err(graph_error)?;
                let points: Vec<FeatureVector> = plan.path.iter().map(|&i| g.node(i).clone()).collect();
                let valid = clf.predict(g.node(plan.terminal()).as_vector());
                (valid, Plan::Path(plan), points)
            }
        };
        let steps = points
            .iter()
            .enumerate()
            .map(|(k, x)| PlanStep {
                features: encoding.decode(x),
                changes: deltas(encoding, &points[k.saturating_sub(1)], x),
            })
            .collect();
        let at = now_ms();
        self.append(&Event::RecourseIssued { at, method })?;
        self.delivered = true;
        self.updated_at = at;
        Ok(RecourseResponse {
            method,
            valid,
            plan,
            steps,
        })
    }
}

fn grad_error(e: GradError) -> ServiceError {
    match e {
        GradError::InvalidArgument(m) => ServiceError::invalid(m),
        other => ServiceError::internal(other.to_string()),
    }
}

fn graph_error(e: GraphError) -> ServiceError {
    match e {
        GraphError::Unreachable => ServiceError::new(ErrorCode::Unreachable, e.to_string()),
        GraphError::InvalidArgument(m) => ServiceError::invalid(m),
        other => ServiceError::internal(other.to_string()),
    }
}

/// All sessions of one service instance.
pub struct SessionStore {
    datasets: BTreeMap<String, Arc<DatasetEntry>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Slot>>>>,
    log_dir: Option<PathBuf>,
}

impl SessionStore {
    /// In-memory store; sessions do not survive a restart.
    pub fn new(datasets: Vec<DatasetEntry>) -> Self {
        Self {
            datasets: datasets.into_iter().map(|d| (d.id.clone(), Arc::new(d))).collect(),
            sessions: RwLock::new(HashMap::new()),
            log_dir: None,
        }
    }

    /// Persistent store over `dir`, replaying every `*.jsonl` log found there.
    pub fn open(dir: impl AsRef<Path>, datasets: Vec<DatasetEntry>) -> Result<Self, ServiceError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut store = Self::new(datasets);
        store.log_dir = Some(dir.to_path_buf());
        let mut logs: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        logs.sort();
        for path in logs {
            let mut slot = store.replay(&path)?;
            slot.log = Some(OpenOptions::new().append(true).open(&path)?);
            store.sessions.write().insert(slot.id.clone(), Arc::new(Mutex::new(slot)));
        }
        Ok(store)
    }

    /// Replays one event log into this store without appending to it.
    pub fn import(&self, path: impl AsRef<Path>) -> Result<SessionRecord, ServiceError> {
        let slot = self.replay(path.as_ref())?;
        let record = slot.record();
        self.sessions.write().insert(slot.id.clone(), Arc::new(Mutex::new(slot)));
        Ok(record)
    }

    fn replay(&self, path: &Path) -> Result<Slot, ServiceError> {
        let corrupt = |m: String| ServiceError::internal(format!("{}: {m}", path.display()));
        let mut lines = BufReader::new(File::open(path)?).lines();
        let first = lines.next().ok_or_else(|| corrupt("empty log".into()))??;
        let Event::Created {
            session_id,
            at,
            request,
            x0,
            pool,
        } = serde_json::from_str(&first).map_err(|e| corrupt(e.to_string()))?
        else {
            return Err(corrupt("log does not start with `created`".into()));
        };
        let dataset = self.dataset(&request.dataset)?;
        let session = ElicitationSession::new(x0, pool, session_config(&request)?)?;
        let mut slot = Slot {
            id: session_id,
            dataset,
            session,
            failure: None,
            delivered: false,
            created_at: at,
            updated_at: at,
            answered: HashMap::new(),
            log: None,
        };
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))? {
                Event::QuestionIssued { option_indices, .. } => {
                    let selected = slot.session.next_question()?.map(|q| q.option_indices.clone());
                    if selected.as_ref() != Some(&option_indices) {
                        return Err(corrupt(format!(
                            "replayed question {selected:?} differs from logged {option_indices:?}"
                        )));
                    }
                }
                Event::AnswerReceived { at, token, answer } => {
                    slot.answer(&token, answer, at)?;
                    if slot.failure.is_some() {
                        return Err(corrupt("a logged answer no longer applies".into()));
                    }
                }
                Event::Failed { at, token, answer, error } => {
                    slot.failure = Some(error);
                    slot.updated_at = at;
                    let record = slot.record();
                    slot.answered.insert(token, (answer, record));
                }
                Event::RecourseIssued { at, .. } => {
                    slot.delivered = true;
                    slot.updated_at = at;
                }
                Event::Created { .. } => return Err(corrupt("duplicate `created`".into())),
            }
        }
        Ok(slot)
    }

    pub fn datasets(&self) -> Vec<DatasetInfo> {
        self.datasets.values().map(|d| d.info()).collect()
    }

    fn dataset(&self, id: &str) -> Result<Arc<DatasetEntry>, ServiceError> {
        self.datasets.get(id).cloned().ok_or_else(|| {
            ServiceError::new(ErrorCode::UnknownDataset, format!("unknown dataset `{id}`"))
                .with_detail(serde_json::json!({ "available": self.datasets.keys().collect::<Vec<_>>() }))
        })
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<Slot>>, ServiceError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::new(ErrorCode::NotFound, format!("no session `{id}`")))
    }

    pub fn create_session(&self, request: CreateSessionRequest) -> Result<SessionRecord, ServiceError> {
        let dataset = self.dataset(&request.dataset)?;
        let x0 = dataset.subject(&request.subject)?;
        let p = dataset.classifier.prob(x0.as_vector());
        if p >= 0.5 {
            return Err(ServiceError::new(
                ErrorCode::SubjectAlreadyPositive,
                "the classifier already accepts this subject",
            )
            .with_detail(serde_json::json!({ "probability": p })));
        }
        let session = ElicitationSession::new(x0.clone(), dataset.pool.clone(), session_config(&request)?)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let log = match &self.log_dir {
            Some(dir) => Some(OpenOptions::new().create_new(true).append(true).open(dir.join(format!("{id}.jsonl")))?),
            None => None,
        };
        let at = now_ms();
        let mut slot = Slot {
            id: id.clone(),
            session,
            failure: None,
            delivered: false,
            created_at: at,
            updated_at: at,
            answered: HashMap::new(),
            log,
            dataset: Arc::clone(&dataset),
        };
        slot.append(&Event::Created {
            session_id: id.clone(),
            at,
            pool: dataset.pool.clone(),
            request,
            x0,
        })?;
        slot.advance(at)?;
        let record = slot.record();
        self.sessions.write().insert(id, Arc::new(Mutex::new(slot)));
        Ok(record)
    }

    pub fn get_session(&self, id: &str) -> Result<SessionRecord, ServiceError> {
        Ok(self.slot(id)?.lock().record())
    }

    pub fn submit_answer(&self, id: &str, request: AnswerRequest) -> Result<SessionRecord, ServiceError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock();
        if request.token.is_empty() {
            return Err(ServiceError::invalid("the idempotency token is empty"));
        }
        if let Some((answer, record)) = slot.answered.get(&request.token) {
            if *answer == request.answer {
                return Ok(record.clone());
            }
            return Err(ServiceError::new(
                ErrorCode::TokenMismatch,
                "this token was already used for a different answer",
            )
            .with_detail(serde_json::json!({ "token": request.token, "recorded": answer })));
        }
        let status = slot.status();
        if status != SessionStatus::AwaitingAnswer {
            return Err(ServiceError::status_conflict(status, "awaiting_answer"));
        }
        slot.answer(&request.token, request.answer, now_ms())
    }

    pub fn transcript(&self, id: &str) -> Result<Vec<TranscriptEntry>, ServiceError> {
        Ok(self.slot(id)?.lock().session.transcript().to_vec())
    }

    pub fn request_recourse(&self, id: &str, request: RecourseRequest) -> Result<RecourseResponse, ServiceError> {
        let method: RecourseMethod = request.method.parse()?;
        let slot = self.slot(id)?;
        let mut slot = slot.lock();
        slot.recourse(method)
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }
}

fn session_config(request: &CreateSessionRequest) -> Result<SessionConfig, ServiceError> {
    Ok(SessionConfig {
        budget: request.budget,
        strategy: Strategy::from_name(&request.strategy, request.k)?,
        margin: request.margin,
        tolerance: request.tolerance,
        seed: request.seed,
    })
}
