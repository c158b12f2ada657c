//! The question-answer loop.
//!
//! A session keeps the subject `x0`, a pool of favorable candidates and the
//! preferences revealed so far. Each round picks the question whose cut passes
//! closest to the incumbent Chebyshev center, records the answer as one or
//! more cuts and re-solves the center.
//!
//! ```
//! use recourse::elicit::{run_simulated, SessionConfig, Strategy};
//! use recourse::{CostMatrix, FeatureVector};
//!
//! let x0 = FeatureVector::from_slice(&[0.0, 0.0]).unwrap();
//! let pool: Vec<_> = [[1.0, 0.0], [0.0, 1.0], [0.7, 0.7]]
//!     .iter()
//!     .map(|p| FeatureVector::from_slice(p).unwrap())
//!     .collect();
//! let truth = CostMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.2]]).unwrap();
//! let cfg = SessionConfig { budget: 2, ..SessionConfig::default() };
//! let session = run_simulated(x0, pool, cfg, &truth, 0).unwrap();
//! assert_eq!(session.transcript().len(), 2);
//! ```

mod respond;
mod select;
mod session;
mod truth;

use thiserror::Error;

use crate::conic::ConicError;
use crate::cost::CostError;

pub use respond::{respond_simulated, ChannelResponder, Responder, SimulatedResponder, DEFAULT_ANSWER_TIMEOUT};
pub use select::{
    cost_order, next_question_exhaustive, next_question_random, next_question_similar_cost, AskedPairs,
    PoolGeometry, Question, Strategy,
};
pub use session::{answer_pairs, drive, run_session, run_simulated, Answer, DriveStatus, ElicitationSession, SessionConfig, TranscriptEntry};
pub use truth::{gen_truth_causal, gen_truth_lqr, gen_truth_random};

#[derive(Debug, Error)]
pub enum ElicitError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("every candidate pair has been asked")]
    PoolExhausted,
    #[error("no admissible window of candidates")]
    NoAdmissibleWindow,
    #[error("answer does not match the pending question: {0}")]
    InvalidAnswer(String),
    #[error("no question is pending")]
    NoPendingQuestion,
    #[error("the question budget is spent")]
    BudgetExhausted,
    #[error("responder disconnected")]
    Disconnected,
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Cost(#[from] CostError),
}
