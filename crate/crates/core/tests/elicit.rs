use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recourse::elicit::{
    drive, gen_truth_causal, gen_truth_lqr, gen_truth_random, next_question_exhaustive, next_question_similar_cost,
    run_simulated, Answer, AskedPairs, ChannelResponder, DriveStatus, ElicitError, ElicitationSession, PoolGeometry,
    SessionConfig, Strategy as Selection,
};
use recourse::{cost, frobenius_inner, pair_matrix, CostMatrix, FeatureVector};

fn fv(v: &[f64]) -> FeatureVector {
    FeatureVector::from_slice(v).unwrap()
}

fn random_pool(n: usize, d: usize, rng: &mut ChaCha8Rng) -> (FeatureVector, Vec<FeatureVector>) {
    let mut point = || fv(&(0..d).map(|_| rng.random::<f64>()).collect::<Vec<_>>());
    let x0 = point();
    let pool = (0..n).map(|_| point()).collect();
    (x0, pool)
}

fn random_spd(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    &b * b.transpose() + DMatrix::identity(d, d) * 0.1
}

#[test]
fn random_truth_is_reproducible_and_one_dimensional_truth_is_one() {
    let a = gen_truth_random(4, &mut ChaCha8Rng::seed_from_u64(9));
    let b = gen_truth_random(4, &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(a, b);
    for seed in 0..20 {
        let one = gen_truth_random(1, &mut ChaCha8Rng::seed_from_u64(seed));
        assert_abs_diff_eq!(one.as_matrix()[(0, 0)], 1.0, epsilon = 1e-12);
    }
}

proptest! {
    #[test]
    fn random_truth_has_unit_spectral_radius(seed in any::<u64>(), d in 1usize..8) {
        let a = gen_truth_random(d, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!((a.max_eigenvalue() - 1.0).abs() <= 1e-9);
        prop_assert!(a.eigenvalues().min() >= -1e-12);
    }
}

#[test]
fn lqr_residual_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..30 {
        let d = rng.random_range(1..=5);
        let (q, r) = (random_spd(d, &mut rng), random_spd(d, &mut rng));
        let a = gen_truth_lqr(&q, &r, 1e-10, 10_000).unwrap();
        let a = a.as_matrix();
        let inv = (&r + a).try_inverse().unwrap();
        let residual = (&q - a * inv * a).norm();
        assert!(residual <= 1e-8, "residual {residual:e}");
    }
}

#[test]
fn lqr_zero_state_cost_gives_zero() {
    let q = DMatrix::zeros(3, 3);
    let r = DMatrix::identity(3, 3);
    let a = gen_truth_lqr(&q, &r, 1e-10, 1000).unwrap();
    assert!(a.as_matrix().norm() <= 1e-10);
}

#[test]
fn causal_truth_is_symmetric_positive_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = gen_truth_causal(&DMatrix::zeros(3, 3), &DMatrix::identity(3, 3)).unwrap();
    assert_eq!(a.as_matrix(), &DMatrix::identity(3, 3));
    for _ in 0..20 {
        let d = rng.random_range(1..=5);
        // strictly lower triangular, i.e. a DAG
        let w = DMatrix::from_fn(d, d, |i, j| if i > j { rng.random::<f64>() * 2.0 - 1.0 } else { 0.0 });
        let a = gen_truth_causal(&w, &random_spd(d, &mut rng)).unwrap();
        let m = a.as_matrix();
        assert!((m - m.transpose()).amax() <= 1e-12);
        assert!(a.eigenvalues().min() > 0.0);
    }
}

#[test]
fn causal_truth_rejects_singular_structure() {
    let w = DMatrix::identity(2, 2);
    assert!(gen_truth_causal(&w, &DMatrix::identity(2, 2)).is_err());
}

/// `|⟨A, M⟩| / ‖M‖_F` from the costs themselves, not the O(d) identity.
fn brute_distance(center: &CostMatrix, x0: &FeatureVector, xi: &FeatureVector, xj: &FeatureVector) -> f64 {
    let m = pair_matrix(xi, xj, x0).unwrap();
    let gap = cost(center, xi, x0).unwrap() - cost(center, xj, x0).unwrap();
    gap.abs() / m.norm()
}

#[test]
fn exhaustive_matches_brute_force_ranking() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.random_range(3..9);
        let (x0, pool) = random_pool(n, 3, &mut rng);
        let center = gen_truth_random(3, &mut rng);
        let geometry = PoolGeometry::new(&x0, &pool);
        let q = next_question_exhaustive(&geometry, &center, &AskedPairs::default()).unwrap();
        let mut best = (f64::INFINITY, (0, 0));
        for i in 0..n {
            for j in i + 1..n {
                let dist = brute_distance(&center, &x0, &pool[i], &pool[j]);
                if dist < best.0 - 1e-12 {
                    best = (dist, (i, j));
                }
            }
        }
        assert_eq!((q.option_indices[0], q.option_indices[1]), best.1);
        assert_abs_diff_eq!(q.projection_distance, best.0, epsilon = 1e-9);
    }
}

/// One-dimensional pool with costs `(0.20, 0.21, 0.90)` under `½I`.
fn three_cost_pool() -> (FeatureVector, Vec<FeatureVector>) {
    let x0 = fv(&[0.0]);
    let pool = [0.90, 0.20, 0.21].iter().map(|c: &f64| fv(&[(2.0 * c).sqrt()])).collect();
    (x0, pool)
}

#[test]
fn similar_cost_examines_only_adjacent_pairs() {
    let (x0, pool) = three_cost_pool();
    let geometry = PoolGeometry::new(&x0, &pool);
    let half = CostMatrix::scaled_identity(1, 0.5);
    let first = next_question_similar_cost(&geometry, &half, &AskedPairs::default(), 2, None).unwrap();
    assert_eq!(first.option_indices, vec![1, 2]);
    let mut asked = AskedPairs::default();
    asked.mark(&[1, 2]);
    asked.mark(&[2, 0]);
    // (1, 0) is unasked but never adjacent in cost order
    let err = next_question_similar_cost(&geometry, &half, &asked, 2, None).unwrap_err();
    assert!(matches!(err, ElicitError::NoAdmissibleWindow));
    assert!(next_question_exhaustive(&geometry, &half, &asked).is_ok());
}

#[test]
fn equal_window_distances_pick_the_cheapest_window() {
    // in one dimension every cut is ±a·|M|, so all distances equal a
    let x0 = fv(&[0.0]);
    let pool: Vec<_> = [0.9, 0.3, 0.6, 0.1].iter().map(|&x| fv(&[x])).collect();
    let geometry = PoolGeometry::new(&x0, &pool);
    let center = CostMatrix::scaled_identity(1, 0.5);
    let q = next_question_similar_cost(&geometry, &center, &AskedPairs::default(), 2, None).unwrap();
    assert_eq!(q.option_indices, vec![3, 1]);
    let q = next_question_similar_cost(&geometry, &center, &AskedPairs::default(), 3, None).unwrap();
    assert_eq!(q.option_indices, vec![3, 1, 2]);
}

#[test]
fn one_question_for_a_two_candidate_pool() {
    let x0 = fv(&[0.0, 0.0]);
    let pool = vec![fv(&[1.0, 0.0]), fv(&[0.0, 1.0])];
    let cfg = SessionConfig {
        budget: 1,
        ..SessionConfig::default()
    };
    let session = run_simulated(x0, pool, cfg, &CostMatrix::identity(2), 0).unwrap();
    assert_eq!(session.transcript().len(), 1);
    assert!((1..=2).contains(&session.prefs().len()));
    // equal costs: the simulated subject is indifferent
    assert_eq!(session.transcript()[0].answer, Answer::Indifferent);
}

fn selections() -> impl Strategy<Value = Selection> {
    prop_oneof![
        Just(Selection::Exhaustive),
        (2usize..4).prop_map(|k| Selection::SimilarCost { k, gap_threshold: None }),
        (2usize..4).prop_map(|k| Selection::Random { k }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Noise-free answers keep the truth in the confidence set, never repeat
    /// a pair and never grow the radius.
    #[test]
    fn noise_free_sessions_keep_the_truth(seed in any::<u64>(), d in 2usize..4, strategy in selections()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x0, pool) = random_pool(12, d, &mut rng);
        let truth = gen_truth_random(d, &mut rng);
        let cfg = SessionConfig { budget: 6, strategy, seed, ..SessionConfig::default() };
        let session = run_simulated(x0, pool, cfg, &truth, seed).unwrap();
        let spec = session.spec();
        for cut in spec.cuts() {
            prop_assert!(frobenius_inner(truth.as_matrix(), cut.matrix()).unwrap() <= spec.margin() + 1e-12);
        }
        let mut seen = AskedPairs::default();
        // the ball only has to respect the cuts, so round 0's ½ is a
        // convention and not an upper bound
        let mut radius = f64::INFINITY;
        for entry in session.transcript() {
            let opts = &entry.option_indices;
            for a in 0..opts.len() {
                for b in a + 1..opts.len() {
                    prop_assert!(!seen.contains(opts[a], opts[b]), "pair repeated");
                }
            }
            seen.mark(opts);
            prop_assert!(entry.radius <= radius + 1e-7, "radius grew from {radius} to {}", entry.radius);
            radius = entry.radius;
        }
    }
}

#[test]
fn fixed_seed_replays_the_transcript() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (x0, pool) = random_pool(30, 3, &mut rng);
    let truth = gen_truth_random(3, &mut rng);
    let cfg = SessionConfig {
        budget: 5,
        strategy: Selection::Random { k: 3 },
        seed: 5,
        ..SessionConfig::default()
    };
    let a = run_simulated(x0.clone(), pool.clone(), cfg.clone(), &truth, 5).unwrap();
    let b = run_simulated(x0, pool, cfg, &truth, 5).unwrap();
    assert_eq!(
        serde_json::to_string(a.transcript()).unwrap(),
        serde_json::to_string(b.transcript()).unwrap()
    );
}

#[test]
fn transcript_json_shape() {
    let x0 = fv(&[0.0, 0.0]);
    let pool = vec![fv(&[1.0, 0.0]), fv(&[0.0, 0.5])];
    let cfg = SessionConfig {
        budget: 1,
        ..SessionConfig::default()
    };
    let session = run_simulated(x0, pool, cfg, &CostMatrix::identity(2), 0).unwrap();
    let json: serde_json::Value = serde_json::to_value(session.transcript()).unwrap();
    let entry = &json[0];
    assert_eq!(entry["round"], 1);
    assert_eq!(entry["option_indices"], serde_json::json!([0, 1]));
    assert_eq!(entry["answer"], serde_json::json!({ "preferred": 1 }));
    assert_eq!(entry["center"].as_array().unwrap().len(), 2);
    assert!(entry["radius"].is_f64());
}

#[test]
fn live_answers_pause_on_timeout_and_resume() {
    let x0 = fv(&[0.0, 0.0]);
    let pool = vec![fv(&[1.0, 0.0]), fv(&[0.0, 0.5]), fv(&[0.6, 0.6])];
    let cfg = SessionConfig {
        budget: 2,
        ..SessionConfig::default()
    };
    let mut session = ElicitationSession::new(x0, pool, cfg).unwrap();
    let (q_tx, q_rx) = mpsc::channel();
    let (a_tx, a_rx) = mpsc::channel();
    let mut responder = ChannelResponder::new(q_tx, a_rx).with_timeout(Duration::from_millis(20));

    // nobody answers: paused with the question still pending
    assert_eq!(drive(&mut session, &mut responder).unwrap(), DriveStatus::Paused);
    let pending = session.pending().cloned().unwrap();
    assert_eq!(q_rx.recv().unwrap(), pending);
    assert_eq!(session.round(), 0);

    let subject = thread::spawn(move || {
        for q in q_rx.iter() {
            if a_tx.send(Answer::Preferred(q.option_indices[0])).is_err() {
                break;
            }
        }
    });
    let mut responder = responder.with_timeout(Duration::from_secs(10));
    assert_eq!(drive(&mut session, &mut responder).unwrap(), DriveStatus::Completed);
    assert_eq!(session.round(), 2);
    assert_eq!(session.transcript()[0].option_indices, pending.option_indices);
    drop(responder);
    subject.join().unwrap();
}

#[test]
fn dropped_subject_is_an_error() {
    let x0 = fv(&[0.0, 0.0]);
    let pool = vec![fv(&[1.0, 0.0]), fv(&[0.0, 0.5])];
    let mut session = ElicitationSession::new(x0, pool, SessionConfig::default()).unwrap();
    let (q_tx, _q_rx) = mpsc::channel();
    let (a_tx, a_rx) = mpsc::channel::<Answer>();
    drop(a_tx);
    let mut responder = ChannelResponder::new(q_tx, a_rx);
    assert!(matches!(drive(&mut session, &mut responder), Err(ElicitError::Disconnected)));
}
