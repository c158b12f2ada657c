//! Learning a subject's Mahalanobis recourse cost from comparison questions,
//! and generating recourse that is robust to what is still unknown about it.
//!
//! The pipeline:
//!
//! 1. [`elicit`] asks pairwise or k-option questions about candidate recourses.
//!    Each answer cuts the set of cost matrices consistent with the subject.
//! 2. [`conic`] solves the semidefinite programs over that set: its Chebyshev
//!    center (the point estimate) and the worst-case cost of a move.
//! 3. [`grad`] and [`graph`] turn the set into recourse, by projected gradient
//!    descent and by shortest paths on a data graph.
//! 4. [`bench`] replays the protocol against simulated subjects; [`service`]
//!    runs it against live ones.
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```text
//! cargo run --example chebyshev_center
//! cargo run --example elicitation_session
//! cargo run --example gradient_recourse
//! cargo run --example graph_recourse
//! cargo run --example worst_case_paths
//! cargo run --example inconsistency
//! cargo run --example truth_generators
//! cargo run --example csv_dataset
//! cargo run --example benchmark
//! ```

pub mod bench;
pub mod conic;
pub mod cost;
pub mod data;
pub mod elicit;
pub mod grad;
pub mod graph;
pub mod service;

pub use cost::{
    cost, frobenius_inner, pair_matrix, ConfidenceSetSpec, CostError, CostMatrix, CutMatrix,
    FeatureVector, PreferenceSet,
};

/// Default margin `ε` of the answer model.
pub const DEFAULT_MARGIN: f64 = 0.01;
