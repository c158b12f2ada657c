use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::respond::{Responder, SimulatedResponder};
use super::select::{
    next_question_exhaustive, next_question_random, next_question_similar_cost, AskedPairs, PoolGeometry, Question,
    Strategy,
};
use super::ElicitError;
use crate::conic::{chebyshev_center, tolerant_center, CenterResult, ConicError, SolverStatus};
use crate::cost::{ConfidenceSetSpec, CostMatrix, CutMatrix, FeatureVector, PreferenceSet};
use crate::DEFAULT_MARGIN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    /// Pool index of the chosen option.
    Preferred(usize),
    /// Only for two-option questions.
    Indifferent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Question budget `T`.
    pub budget: usize,
    pub strategy: Strategy,
    /// Margin `ε` of every cut.
    pub margin: f64,
    /// Inconsistency tolerance. When set, an answer that empties the
    /// confidence set falls back to the tolerant center instead of failing.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Seeds the random selection strategy.
    #[serde(default)]
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            budget: 5,
            strategy: Strategy::Exhaustive,
            margin: DEFAULT_MARGIN,
            tolerance: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub round: usize,
    pub option_indices: Vec<usize>,
    pub answer: Answer,
    pub center: CostMatrix,
    pub radius: f64,
}

/// One subject's elicitation state. Single writer; clone for snapshots.
#[derive(Debug, Clone)]
pub struct ElicitationSession {
    x0: FeatureVector,
    pool: Vec<FeatureVector>,
    geometry: PoolGeometry,
    config: SessionConfig,
    prefs: PreferenceSet,
    spec: ConfidenceSetSpec,
    asked: AskedPairs,
    round: usize,
    incumbent: CenterResult,
    violated: BTreeSet<usize>,
    pending: Option<Question>,
    exhausted: bool,
    transcript: Vec<TranscriptEntry>,
    rng: ChaCha8Rng,
}

impl ElicitationSession {
    /// Round 0 with the `½I` incumbent.
    pub fn new(x0: FeatureVector, pool: Vec<FeatureVector>, config: SessionConfig) -> Result<Self, ElicitError> {
        if pool.is_empty() {
            return Err(ElicitError::InvalidArgument("the candidate pool is empty".into()));
        }
        for x in &pool {
            x.check_dim(&x0)?;
        }
        if !(config.margin >= 0.0 && config.margin.is_finite()) {
            return Err(ElicitError::InvalidArgument(format!("margin must be ≥ 0, got {}", config.margin)));
        }
        if let Some(alpha) = config.tolerance {
            if !(0.0..1.0).contains(&alpha) {
                return Err(ElicitError::InvalidArgument(format!("tolerance must lie in [0, 1), got {alpha}")));
            }
        }
        let k = config.strategy.options();
        if k < 2 {
            return Err(ElicitError::InvalidArgument("questions need at least two options".into()));
        }
        let spec = ConfidenceSetSpec::unconstrained(x0.dim(), config.margin);
        let incumbent = chebyshev_center(&spec)?;
        Ok(Self {
            geometry: PoolGeometry::new(&x0, &pool),
            prefs: PreferenceSet::new(config.margin),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            x0,
            pool,
            config,
            spec,
            asked: AskedPairs::default(),
            round: 0,
            incumbent,
            violated: BTreeSet::new(),
            pending: None,
            exhausted: false,
            transcript: Vec::new(),
        })
    }

    pub fn x0(&self) -> &FeatureVector {
        &self.x0
    }

    pub fn pool(&self) -> &[FeatureVector] {
        &self.pool
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn budget(&self) -> usize {
        self.config.budget
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn prefs(&self) -> &PreferenceSet {
        &self.prefs
    }

    pub fn spec(&self) -> &ConfidenceSetSpec {
        &self.spec
    }

    pub fn asked(&self) -> &AskedPairs {
        &self.asked
    }

    pub fn incumbent(&self) -> &CenterResult {
        &self.incumbent
    }

    /// Cut indices the tolerant fallback chose to violate.
    pub fn violated(&self) -> &BTreeSet<usize> {
        &self.violated
    }

    pub fn pending(&self) -> Option<&Question> {
        self.pending.as_ref()
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    /// Budget spent, or no admissible question left.
    pub fn is_complete(&self) -> bool {
        self.round >= self.config.budget || self.exhausted
    }

    /// The pending question, selecting a new one if none is outstanding.
    /// `None` once the session is complete; a pool that runs out of
    /// questions completes the session early.
    pub fn next_question(&mut self) -> Result<Option<&Question>, ElicitError> {
        if self.pending.is_none() && !self.is_complete() {
            let center = &self.incumbent.center;
            let picked = match &self.config.strategy {
                Strategy::Exhaustive => next_question_exhaustive(&self.geometry, center, &self.asked),
                Strategy::SimilarCost { k, gap_threshold } => {
                    next_question_similar_cost(&self.geometry, center, &self.asked, *k, *gap_threshold)
                }
                Strategy::Random { k } => next_question_random(&self.geometry, center, &self.asked, *k, &mut self.rng),
            };
            match picked {
                Ok(q) => self.pending = Some(q),
                Err(ElicitError::PoolExhausted | ElicitError::NoAdmissibleWindow) => self.exhausted = true,
                Err(e) => return Err(e),
            }
        }
        Ok(self.pending.as_ref())
    }

    /// Records the answer to the pending question and re-solves the center.
    /// On error the session is left unchanged.
    pub fn apply_answer(&mut self, answer: Answer) -> Result<&TranscriptEntry, ElicitError> {
        let question = self.pending.as_ref().ok_or(ElicitError::NoPendingQuestion)?;
        let new_pairs = answer_pairs(&question.option_indices, answer)?;

        let mut prefs = self.prefs.clone();
        let mut spec = self.spec.clone();
        for &(i, j) in &new_pairs {
            if prefs.insert(i, j) {
                spec = spec.with_cut(CutMatrix::new((i, j), &self.pool[i], &self.pool[j], &self.x0)?);
            }
        }
        let (incumbent, violated) = match chebyshev_center(&spec) {
            Ok(c) => (c, BTreeSet::new()),
            Err(ConicError::Infeasible { .. }) if self.config.tolerance.is_some() => {
                let alpha = self.config.tolerance.unwrap_or(0.0);
                let t = tolerant_center(&spec, alpha, None)?;
                let result = CenterResult {
                    center: t.center,
                    radius: t.radius,
                    status: SolverStatus::Optimal,
                    multipliers: Vec::new(),
                };
                (result, t.violated)
            }
            Err(e) => return Err(e.into()),
        };

        let question = self.pending.take().expect("checked above");
        self.asked.mark(&question.option_indices);
        self.prefs = prefs;
        self.spec = spec;
        self.incumbent = incumbent;
        self.violated = violated;
        self.round += 1;
        self.transcript.push(TranscriptEntry {
            round: self.round,
            option_indices: question.option_indices,
            answer,
            center: self.incumbent.center.clone(),
            radius: self.incumbent.radius,
        });
        Ok(self.transcript.last().expect("just pushed"))
    }

    /// Confidence set after the first `t` answers.
    pub fn spec_at(&self, t: usize) -> Result<ConfidenceSetSpec, ElicitError> {
        let mut prefs = PreferenceSet::new(self.config.margin);
        for entry in self.transcript.iter().take(t) {
            for (i, j) in answer_pairs(&entry.option_indices, entry.answer)? {
                prefs.insert(i, j);
            }
        }
        Ok(ConfidenceSetSpec::from_preferences(&self.x0, &self.pool, &prefs)?)
    }

    /// Incumbent center after `t` answers; `½I` for `t = 0`.
    pub fn center_at(&self, t: usize) -> Option<CostMatrix> {
        match t {
            0 => Some(CostMatrix::scaled_identity(self.x0.dim(), 0.5)),
            t => self.transcript.get(t - 1).map(|e| e.center.clone()),
        }
    }
}

/// Preference pairs revealed by `answer`: the chosen option over each other
/// one, or both orders for indifference.
pub fn answer_pairs(options: &[usize], answer: Answer) -> Result<Vec<(usize, usize)>, ElicitError> {
    match answer {
        Answer::Preferred(i) => {
            if !options.contains(&i) {
                return Err(ElicitError::InvalidAnswer(format!("{i} is not among the options {options:?}")));
            }
            Ok(options.iter().filter(|&&j| j != i).map(|&j| (i, j)).collect())
        }
        Answer::Indifferent => {
            if options.len() != 2 {
                return Err(ElicitError::InvalidAnswer("indifference needs exactly two options".into()));
            }
            Ok(vec![(options[0], options[1]), (options[1], options[0])])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveStatus {
    Completed,
    /// The responder timed out; the pending question stays attached and the
    /// session can be driven again later.
    Paused,
}

/// Runs select → answer → update until the session completes or pauses.
pub fn drive(session: &mut ElicitationSession, responder: &mut dyn Responder) -> Result<DriveStatus, ElicitError> {
    loop {
        let Some(question) = session.next_question()?.cloned() else {
            return Ok(DriveStatus::Completed);
        };
        match responder.respond(session, &question)? {
            Some(answer) => {
                session.apply_answer(answer)?;
            }
            None => return Ok(DriveStatus::Paused),
        }
    }
}

/// Builds a session and drives it. Check [`ElicitationSession::is_complete`]
/// when the responder can time out.
pub fn run_session(
    x0: FeatureVector,
    pool: Vec<FeatureVector>,
    config: SessionConfig,
    responder: &mut dyn Responder,
) -> Result<ElicitationSession, ElicitError> {
    let mut session = ElicitationSession::new(x0, pool, config)?;
    drive(&mut session, responder)?;
    Ok(session)
}

/// A noise-free simulated subject with ground truth `truth`.
pub fn run_simulated(
    x0: FeatureVector,
    pool: Vec<FeatureVector>,
    config: SessionConfig,
    truth: &CostMatrix,
    seed: u64,
) -> Result<ElicitationSession, ElicitError> {
    let mut responder = SimulatedResponder::new(truth.clone(), 0.0, 0.0, seed);
    run_session(x0, pool, config, &mut responder)
}
