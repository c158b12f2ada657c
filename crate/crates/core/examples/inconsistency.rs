//! A subject who contradicts themselves.
//!
//! Three answers that form a cycle leave no cost matrix with room to spare
//! when the margin is zero. With a tolerance the session drops the fewest
//! answers needed and carries on.

use recourse::elicit::{Answer, ElicitationSession, SessionConfig, Strategy};
use recourse::FeatureVector;

fn cyclic_session(tolerance: Option<f64>) {
    let fv = |v: &[f64]| FeatureVector::from_slice(v).unwrap();
    let pool = vec![fv(&[0.9, 0.2]), fv(&[0.3, 0.8]), fv(&[0.6, 0.6])];
    let cfg = SessionConfig {
        budget: 3,
        strategy: Strategy::Exhaustive,
        margin: 0.0,
        tolerance,
        seed: 0,
    };
    let mut s = ElicitationSession::new(fv(&[0.0, 0.0]), pool, cfg).unwrap();
    println!("tolerance {tolerance:?}");
    while let Some(q) = s.next_question().unwrap().cloned() {
        let (a, b) = (q.option_indices[0], q.option_indices[1]);
        // 0 over 1, 1 over 2, 2 over 0
        let pick = if b == (a + 1) % 3 { a } else { b };
        match s.apply_answer(Answer::Preferred(pick)).map(|e| (e.round, e.radius)) {
            Ok((round, radius)) => println!("  round {round}: {pick} preferred, radius {radius:.4}, dropped {:?}", s.violated()),
            Err(e) => {
                println!("  round {}: {pick} preferred rejected: {e}", s.round() + 1);
                return;
            }
        }
    }
}

fn main() {
    cyclic_session(None);
    cyclic_session(Some(0.5));
}
